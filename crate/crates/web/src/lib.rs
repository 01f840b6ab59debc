//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs nothing beyond `JSON.parse`. The logic lives in plain functions
//! that the `_json` wrappers serialise, so it is testable natively.

use hgo_gp::{fit, run_scenario, Dataset, HighGainObserver, KernelParams, ObserverConfig, ObserverState, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Points per returned series.
const MAX_POINTS: usize = 1500;

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub observer_scale: f64,
    pub noise_variance: f64,
    pub trigger_distance: f64,
    pub capacity: usize,
    pub duration: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        Self {
            observer_scale: c.observer.scale,
            noise_variance: c.scenario.noise_variance,
            trigger_distance: c.window.trigger_distance,
            capacity: c.window.capacity,
            duration: c.scenario.duration,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScenarioSeries {
    pub t: Vec<f64>,
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    pub lf_true: Vec<f64>,
    pub gp_h1: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Positions where the window accepted a sample.
    pub samples: Vec<[f64; 2]>,
    pub obstacles: Vec<([f64; 2], f64)>,
    pub mae_h1: f64,
    pub mae_baseline: f64,
}

/// Runs the obstacle scenario with a 1 ms step and returns decimated series.
pub fn scenario(params: &ScenarioParams) -> Result<ScenarioSeries, String> {
    let mut cfg = ScenarioConfig::default();
    cfg.observer.scale = params.observer_scale;
    cfg.scenario.noise_variance = params.noise_variance;
    cfg.window.trigger_distance = params.trigger_distance;
    cfg.window.capacity = params.capacity;
    cfg.scenario.duration = params.duration;
    cfg.scenario.transient = cfg.scenario.transient.min(0.25 * params.duration);
    // a coarser step keeps the page responsive; the step rule still applies
    cfg.scenario.dt = 1e-3;
    let cfg = cfg.resolved().with_seed(params.seed);
    let run = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let rows = &run.trace.rows;
    let summary = run.trace.error_summary(cfg.scenario.transient);
    let mut out = ScenarioSeries {
        samples: rows
            .iter()
            .filter(|r| r.window_event == 1)
            .map(|r| [r.p_x, r.p_y])
            .collect(),
        obstacles: cfg.scenario.obstacles.iter().map(|o| (o.center, o.radius)).collect(),
        mae_h1: summary.mae_h1,
        mae_baseline: summary.mae_baseline,
        ..Default::default()
    };
    for r in rows.iter().step_by(stride(rows.len())) {
        out.t.push(r.t);
        out.p_x.push(r.p_x);
        out.p_y.push(r.p_y);
        out.lf_true.push(r.lf_hs_true);
        out.gp_h1.push(r.gp_h1_mean);
        out.baseline.push(r.baseline_lf_gph);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSeries {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub gradient: Vec<f64>,
}

/// One-dimensional posterior on `points` evenly spaced inputs in `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn posterior_1d(
    xs: &[f64],
    ys: &[f64],
    amplitude: f64,
    length_scale: f64,
    noise_variance: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<PosteriorSeries, String> {
    if points < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err("need at least two grid points and lo < hi".into());
    }
    let kernel = KernelParams::new(amplitude, vec![length_scale]).map_err(|e| e.to_string())?;
    let data = Dataset::new(xs.iter().map(|x| vec![*x]).collect(), ys.to_vec(), noise_variance)
        .map_err(|e| e.to_string())?;
    let gp = fit(kernel, data).map_err(|e| e.to_string())?;
    let mut out = PosteriorSeries {
        x: Vec::with_capacity(points),
        mean: Vec::with_capacity(points),
        std: Vec::with_capacity(points),
        gradient: Vec::with_capacity(points),
    };
    for i in 0..points {
        let x = [lo + (hi - lo) * i as f64 / (points - 1) as f64];
        out.x.push(x[0]);
        out.mean.push(gp.mean(&x).map_err(|e| e.to_string())?);
        out.std.push(gp.variance(&x).map_err(|e| e.to_string())?.sqrt());
        out.gradient.push(gp.mean_gradient(&x).map_err(|e| e.to_string())?[0]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObserverSeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub zhat2: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Observer with gains (8, 15) tracking `y = sin t` plus held noise;
/// `zhat2` should follow `cos t`.
pub fn observer_response(scale: f64, noise_variance: f64, duration: f64, seed: u64) -> Result<ObserverSeries, String> {
    let config = ObserverConfig::new(vec![8.0, 15.0], scale).map_err(|e| e.to_string())?;
    let dt = config.max_step().min(1e-3);
    let noise = Normal::new(0.0, noise_variance.max(0.0).sqrt()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs =
        HighGainObserver::new(config.clone(), ObserverState::initial(&config, 0.0, 0.0), dt).map_err(|e| e.to_string())?;
    let steps = (duration / dt).round() as usize;
    let keep = stride(steps);
    let mut out = ObserverSeries::default();
    for k in 0..steps {
        let t = k as f64 * dt;
        let y = t.sin() + noise.sample(&mut rng);
        if k % keep == 0 {
            out.t.push(t);
            out.y.push(y);
            out.zhat2.push(obs.estimates()[1]);
            out.truth.push(t.cos());
        }
        obs.step_held(y).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

fn to_json<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    value
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

/// `params` is a JSON object with any of the fields of [`ScenarioParams`].
#[wasm_bindgen(js_name = runScenario)]
pub fn run_scenario_json(params: &str) -> Result<String, JsError> {
    let params: ScenarioParams = serde_json::from_str(params).map_err(|e| JsError::new(&e.to_string()))?;
    to_json(scenario(&params))
}

#[wasm_bindgen(js_name = gpPosterior)]
#[allow(clippy::too_many_arguments)]
pub fn gp_posterior_json(
    xs: &[f64],
    ys: &[f64],
    amplitude: f64,
    length_scale: f64,
    noise_variance: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<String, JsError> {
    to_json(posterior_1d(xs, ys, amplitude, length_scale, noise_variance, lo, hi, points))
}

#[wasm_bindgen(js_name = observerResponse)]
pub fn observer_response_json(scale: f64, noise_variance: f64, duration: f64, seed: u64) -> Result<String, JsError> {
    to_json(observer_response(scale, noise_variance, duration, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_series_are_aligned_and_decimated() {
        let s = scenario(&ScenarioParams {
            duration: 4.0,
            ..Default::default()
        })
        .unwrap();
        assert!(s.t.len() <= MAX_POINTS + 1 && s.t.len() > 100);
        for v in [&s.p_x, &s.p_y, &s.lf_true, &s.gp_h1, &s.baseline] {
            assert_eq!(v.len(), s.t.len());
        }
        assert_eq!(s.obstacles.len(), 2);
        assert!(!s.samples.is_empty());
        assert!(s.mae_h1.is_finite() && s.mae_baseline.is_finite());
    }

    #[test]
    fn scenario_rejects_bad_parameters() {
        let p = ScenarioParams {
            trigger_distance: 0.0,
            ..Default::default()
        };
        assert!(scenario(&p).unwrap_err().contains("window.trigger_distance"));
    }

    #[test]
    fn posterior_interpolates_with_small_noise() {
        let p = posterior_1d(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], 1.0, 0.7, 1e-6, -1.0, 1.0, 3).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-3 && p.mean[1].abs() < 1e-3);
        assert!(p.std.iter().all(|s| *s < 1e-2));
        assert!(p.gradient[1].abs() < 1e-9);
        assert!(posterior_1d(&[], &[], 1.0, 1.0, 0.1, 0.0, 0.0, 10).is_err());
    }

    #[test]
    fn observer_tracks_cosine() {
        let o = observer_response(20.0, 0.0, 6.0, 1).unwrap();
        let last = o.t.len() - 1;
        assert!((o.zhat2[last] - o.truth[last]).abs() < 0.05);
        assert!(observer_response(20.0, 0.0, 1.0, 1).is_ok());
        assert!(ObserverConfig::new(vec![8.0, -15.0], 20.0).is_err());
    }
}
