//! Double-integrator agent tracking a reference loop among disc obstacles.
//!
//! The measured output is the smoothed squared distance to the nearest
//! obstacle plus Gaussian noise. A second-order high-gain observer runs on
//! that output; its two estimates are sampled into a sliding window and
//! regressed on the agent state. Two estimates of the output's Lie
//! derivative are compared along the run:
//!
//! * `gp_h1`: a regressor trained directly on the observer's derivative
//!   estimate,
//! * `baseline`: the Lie derivative of a regressor trained on the output
//!   estimate, `grad mu(x) . f(x)`.

pub mod field;
pub mod reference;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{composite_bound, sampled_lipschitz, observer_gap, BoundReport, GapTerm, TrajectoryTube};
use crate::config::{ConfigError, ScenarioConfig};
use crate::error::{Error, Result};
use crate::gp::{fit, GpPosterior};
use crate::observer::{HighGainObserver, ObserverState};
use crate::window::SlidingWindow;

use self::field::smoothed_distance;
use self::reference::ReferenceLoop;

pub use self::field::{smooth_min, squared_distance, Obstacle};

/// Stream offsets so the noise and the tube queries never share draws.
const NOISE_STREAM: u64 = 0;
const QUERY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl AgentState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.position[0], self.position[1], self.velocity[0], self.velocity[1]]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            position: [x[0], x[1]],
            velocity: [x[2], x[3]],
        }
    }

    fn is_finite(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|v| v.is_finite())
    }
}

/// `h_s(p)` and its Lie derivative along the drift, `grad h_s . v`.
pub fn hs_and_lie_derivative(obstacles: &[Obstacle], smoothing: f64, state: &AgentState) -> (f64, f64) {
    let (hs, g) = smoothed_distance(obstacles, smoothing, state.position);
    (hs, g[0] * state.velocity[0] + g[1] * state.velocity[1])
}

/// PD tracking law `u = -kp (p - p*) - kv (v - v*)`.
pub fn control_input(config: &ScenarioConfig, reference: &ReferenceLoop, state: &AgentState, t: f64) -> Result<[f64; 2]> {
    let (p_ref, v_ref) = reference.sample(t)?;
    let c = &config.scenario.controller;
    Ok([
        -c.kp * (state.position[0] - p_ref[0]) - c.kv * (state.velocity[0] - v_ref[0]),
        -c.kp * (state.position[1] - p_ref[1]) - c.kv * (state.velocity[1] - v_ref[1]),
    ])
}

fn agent_rhs(config: &ScenarioConfig, reference: &ReferenceLoop, x: &AgentState, t: f64) -> Result<[f64; 4]> {
    let u = control_input(config, reference, x, t)?;
    Ok([x.velocity[0], x.velocity[1], u[0], u[1]])
}

fn agent_step(config: &ScenarioConfig, reference: &ReferenceLoop, x: &AgentState, t: f64, dt: f64) -> Result<AgentState> {
    let shift = |a: f64, k: &[f64; 4]| AgentState {
        position: [x.position[0] + a * k[0], x.position[1] + a * k[1]],
        velocity: [x.velocity[0] + a * k[2], x.velocity[1] + a * k[3]],
    };
    let k1 = agent_rhs(config, reference, x, t)?;
    let k2 = agent_rhs(config, reference, &shift(0.5 * dt, &k1), t + 0.5 * dt)?;
    let k3 = agent_rhs(config, reference, &shift(0.5 * dt, &k2), t + 0.5 * dt)?;
    let k4 = agent_rhs(config, reference, &shift(dt, &k3), t + dt)?;
    let incr: [f64; 4] = std::array::from_fn(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    Ok(shift(dt, &incr))
}

/// One recorded instant. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub y_noisy: f64,
    pub hs_true: f64,
    #[serde(rename = "Lf_hs_true")]
    pub lf_hs_true: f64,
    pub zhat1: f64,
    pub zhat2: f64,
    pub gp_h_mean: f64,
    pub gp_h1_mean: f64,
    #[serde(rename = "baseline_Lf_gph")]
    pub baseline_lf_gph: f64,
    pub err_h1: f64,
    pub err_baseline: f64,
    /// 1 when a window sample was accepted at this instant.
    pub window_event: u8,
}

impl TraceRow {
    pub fn state(&self) -> Vec<f64> {
        vec![self.p_x, self.p_y, self.v_x, self.v_y]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
}

/// Mean absolute errors after the transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub transient: f64,
    pub samples: usize,
    pub mae_h1: f64,
    pub mae_baseline: f64,
    pub mae_observer: f64,
}

impl ErrorSummary {
    /// Relative reduction of the derivative-regressor error against the baseline.
    pub fn improvement(&self) -> f64 {
        1.0 - self.mae_h1 / self.mae_baseline
    }
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn error_summary(&self, transient: f64) -> ErrorSummary {
        let tail: Vec<&TraceRow> = self.rows.iter().filter(|r| r.t > transient).collect();
        let n = tail.len().max(1) as f64;
        ErrorSummary {
            transient,
            samples: tail.len(),
            mae_h1: tail.iter().map(|r| r.err_h1).sum::<f64>() / n,
            mae_baseline: tail.iter().map(|r| r.err_baseline).sum::<f64>() / n,
            mae_observer: tail.iter().map(|r| (r.zhat2 - r.lf_hs_true).abs()).sum::<f64>() / n,
        }
    }
}

/// A completed run: the trace plus what the bound evaluation needs.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trace: SimulationTrace,
    pub window: SlidingWindow,
    /// Every integration-step state, regardless of `record_every`.
    states: Vec<(f64, AgentState)>,
    pub gp_h: GpPosterior,
    pub gp_h1: GpPosterior,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation failed after {} recorded rows: {source}", partial.len())]
    Failed {
        source: Error,
        partial: SimulationTrace,
    },
}

struct Regressors {
    h: GpPosterior,
    h1: GpPosterior,
}

fn refit(config: &ScenarioConfig, window: &SlidingWindow) -> Result<Regressors> {
    let noise = config.gp.noise_variance;
    Ok(Regressors {
        h: fit(config.gp.kernel(), window.as_dataset(0, noise)?)?,
        h1: fit(config.gp.kernel(), window.as_dataset(1, noise)?)?,
    })
}

/// Runs the closed-loop simulation with the observer and both estimators.
pub fn run_scenario(config: &ScenarioConfig) -> std::result::Result<ScenarioRun, SimulationError> {
    config.validate()?;
    let mut trace = SimulationTrace::default();
    match simulate(config, &mut trace) {
        Ok((window, states, regs)) => Ok(ScenarioRun {
            trace,
            window,
            states,
            gp_h: regs.h,
            gp_h1: regs.h1,
        }),
        Err(source) => Err(SimulationError::Failed { source, partial: trace }),
    }
}

type Simulated = (SlidingWindow, Vec<(f64, AgentState)>, Regressors);

fn simulate(
    config: &ScenarioConfig,
    trace: &mut SimulationTrace,
) -> Result<Simulated> {
    let sc = &config.scenario;
    let reference = ReferenceLoop::new(&sc.reference)?;
    let dt = sc.dt;
    let steps = (sc.duration / dt).round() as u64;

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(NOISE_STREAM);
    let noise = Normal::new(0.0, sc.noise_variance.sqrt())
        .map_err(|e| Error::Argument(format!("noise distribution: {e}")))?;
    let mut draw_noise = || if sc.noise_variance > 0.0 { noise.sample(&mut rng) } else { 0.0 };

    let mut x = match sc.initial_state {
        Some(s) => AgentState::from_slice(&s),
        None => {
            let (p, v) = reference.sample(0.0)?;
            AgentState {
                position: p,
                velocity: v,
            }
        }
    };
    let (hs0, _) = hs_and_lie_derivative(&sc.obstacles, sc.smoothing, &x);
    let y0 = hs0 + draw_noise();
    let mut observer = HighGainObserver::new(
        config.observer.clone(),
        ObserverState::initial(&config.observer, y0, 0.0),
        dt,
    )?;
    let mut window = SlidingWindow::new(config.window.capacity, config.window.trigger_distance)?;
    let mut regs: Option<Regressors> = None;
    let mut states = Vec::with_capacity(steps as usize + 1);
    let mut y = y0;

    for k in 0..=steps {
        let t = k as f64 * dt;
        if !x.is_finite() {
            return Err(Error::Divergence {
                time: t,
                state: x.to_vec(),
            });
        }
        let (hs, lf_hs) = hs_and_lie_derivative(&sc.obstacles, sc.smoothing, &x);
        if k > 0 {
            y = hs + draw_noise();
        }
        let xv = x.to_vec();
        let z = observer.estimates().to_vec();

        let accepted = window.offer_sample(t, &xv, &z)?;
        if accepted {
            regs = Some(refit(config, &window)?);
        }
        let r = regs.as_ref().expect("first sample is always accepted");
        let gp_h = r.h.mean(&xv)?;
        let gp_h1 = r.h1.mean(&xv)?;
        let grad = r.h.mean_gradient(&xv)?;
        // drift of the double integrator is (v, 0)
        let baseline = grad[0] * x.velocity[0] + grad[1] * x.velocity[1];

        states.push((t, x));
        if k % sc.record_every as u64 == 0 {
            trace.rows.push(TraceRow {
                t,
                p_x: x.position[0],
                p_y: x.position[1],
                v_x: x.velocity[0],
                v_y: x.velocity[1],
                y_noisy: y,
                hs_true: hs,
                lf_hs_true: lf_hs,
                zhat1: z[0],
                zhat2: z[1],
                gp_h_mean: gp_h,
                gp_h1_mean: gp_h1,
                baseline_lf_gph: baseline,
                err_h1: (gp_h1 - lf_hs).abs(),
                err_baseline: (baseline - lf_hs).abs(),
                window_event: accepted as u8,
            });
        }
        if k == steps {
            break;
        }
        observer.step_held(y)?;
        x = agent_step(config, &reference, &x, t, dt)?;
    }
    let regs = regs.expect("first sample is always accepted");
    Ok((window, states, regs))
}

/// Uniform draw from the unit ball in `dim` dimensions.
fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let radius = rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|d| radius * d / norm).collect()
}

/// Bound report for the final window together with its empirical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub report: BoundReport,
    pub window_start: f64,
    pub window_end: f64,
    pub tube_radius: f64,
    pub tube_centers: usize,
    pub query_points: usize,
    /// Queries where `|gp_h1(x) - L_f h_s(x)|` exceeded the envelope.
    pub violations: usize,
    pub max_error: f64,
    pub min_envelope: f64,
    /// Largest ratio of error to envelope over the queries.
    pub max_ratio: f64,
}

impl BoundEvaluation {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

impl ScenarioRun {
    /// Evaluates the derivative-regressor error envelope for the last window
    /// on the trajectory tube spanned by that window.
    ///
    /// Ground truth is available in simulation, so the observer gap term is
    /// computed from the exact Lie derivative at the window's sample states
    /// and the target's Lipschitz constant is estimated on the query points.
    pub fn evaluate_bounds(&self, config: &ScenarioConfig) -> Result<BoundEvaluation> {
        let sc = &config.scenario;
        let bc = &config.bounds;
        let (start, end) = match (self.window.first_time(), self.window.last_time()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::State("window is empty".into())),
        };
        let stride = ((bc.query_spacing / sc.dt).round() as usize).max(1);
        let segment: Vec<&(f64, AgentState)> = self
            .states
            .iter()
            .filter(|(t, _)| *t >= start - 0.5 * sc.dt && *t <= end + 0.5 * sc.dt)
            .collect();
        let mut centers: Vec<(f64, Vec<f64>)> = segment
            .iter()
            .step_by(stride)
            .map(|(t, x)| (*t, x.to_vec()))
            .collect();
        if let Some((t, x)) = segment.last() {
            if centers.last().map(|c| c.0) != Some(*t) {
                centers.push((*t, x.to_vec()));
            }
        }
        let times: Vec<f64> = centers.iter().map(|c| c.0).collect();
        let points: Vec<Vec<f64>> = centers.into_iter().map(|c| c.1).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        rng.set_stream(QUERY_STREAM);
        let mut queries = points.clone();
        if bc.tube_radius > 0.0 {
            for c in &points {
                for _ in 0..bc.queries_per_center {
                    let u = uniform_in_ball(&mut rng, c.len());
                    queries.push(c.iter().zip(u).map(|(ci, ui)| ci + bc.tube_radius * ui).collect());
                }
            }
        }

        let truth = |x: &[f64]| hs_and_lie_derivative(&sc.obstacles, sc.smoothing, &AgentState::from_slice(x)).1;
        let lipschitz_target = sampled_lipschitz(truth, &queries, bc.lipschitz_step);

        let observer_targets: Vec<f64> = self.window.samples().map(|s| s.targets[1]).collect();
        let ideal_targets: Vec<f64> = self.window.samples().map(|s| truth(&s.state)).collect();
        let gap = observer_gap(&self.gp_h1, &observer_targets, &ideal_targets, config.gp.amplitude)?;

        let tube = TrajectoryTube::from_samples(&times, points, bc.tube_radius)?;
        let report = composite_bound(
            &self.gp_h1,
            &tube,
            &config.bound_settings(),
            lipschitz_target,
            GapTerm::Computed(gap),
        )?;

        let mut violations = 0;
        let mut max_error = 0.0f64;
        let mut min_envelope = f64::INFINITY;
        let mut max_ratio = 0.0f64;
        for q in &queries {
            let err = (self.gp_h1.mean(q)? - truth(q)).abs();
            let env = report.envelope(&self.gp_h1, q)?;
            if err > env {
                violations += 1;
            }
            max_error = max_error.max(err);
            min_envelope = min_envelope.min(env);
            max_ratio = max_ratio.max(err / env);
        }
        Ok(BoundEvaluation {
            report,
            window_start: start,
            window_end: end,
            tube_radius: bc.tube_radius,
            tube_centers: tube.centers.len(),
            query_points: queries.len(),
            violations,
            max_error,
            min_envelope,
            max_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stationary_agent_has_zero_lie_derivative() {
        let obstacles = [Obstacle::new([0.0, 0.0], 1.0).unwrap()];
        let x = AgentState {
            position: [3.0, 0.5],
            velocity: [0.0, 0.0],
        };
        assert_eq!(hs_and_lie_derivative(&obstacles, -5.0, &x).1, 0.0);
    }

    #[test]
    fn radial_motion_lie_derivative() {
        let obstacles = [Obstacle::new([1.0, 1.0], 0.5).unwrap()];
        let (d, s) = (2.3, 0.8);
        let dir = [0.6, 0.8];
        let x = AgentState {
            position: [1.0 + d * dir[0], 1.0 + d * dir[1]],
            velocity: [s * dir[0], s * dir[1]],
        };
        let (hs, lf) = hs_and_lie_derivative(&obstacles, -5.0, &x);
        assert_relative_eq!(hs, (d - 0.5) * (d - 0.5), epsilon = 1e-12);
        assert_relative_eq!(lf, 2.0 * (d - 0.5) * s, epsilon = 1e-12);
    }

    #[test]
    fn lie_derivative_matches_flow_finite_difference() {
        let cfg = ScenarioConfig::default();
        let obstacles = &cfg.scenario.obstacles;
        for (p, v) in [([0.4, 0.1], [1.0, -0.3]), ([-2.0, -0.6], [0.2, 0.9]), ([2.5, -3.0], [-0.7, 0.1])] {
            let x = AgentState { position: p, velocity: v };
            let (_, lf) = hs_and_lie_derivative(obstacles, -5.0, &x);
            let h = 1e-6;
            let fwd = AgentState {
                position: [p[0] + h * v[0], p[1] + h * v[1]],
                velocity: v,
            };
            let bwd = AgentState {
                position: [p[0] - h * v[0], p[1] - h * v[1]],
                velocity: v,
            };
            let fd = (hs_and_lie_derivative(obstacles, -5.0, &fwd).0 - hs_and_lie_derivative(obstacles, -5.0, &bwd).0)
                / (2.0 * h);
            assert_relative_eq!(lf, fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn control_law_examples() {
        let cfg = ScenarioConfig::default();
        let reference = ReferenceLoop::new(&cfg.scenario.reference).unwrap();
        let (p, v) = reference.sample(1.3).unwrap();
        let on_ref = AgentState { position: p, velocity: v };
        assert_eq!(control_input(&cfg, &reference, &on_ref, 1.3).unwrap(), [0.0, 0.0]);
        let off = AgentState {
            position: [p[0] + 1.0, p[1]],
            velocity: v,
        };
        let u = control_input(&cfg, &reference, &off, 1.3).unwrap();
        assert_relative_eq!(u[0], -8.0, epsilon = 1e-12);
        assert_relative_eq!(u[1], 0.0, epsilon = 1e-12);
        let off2 = AgentState {
            position: [p[0] + 2.0, p[1] - 0.4],
            velocity: [v[0] + 0.2, v[1] - 1.0],
        };
        let off1 = AgentState {
            position: [p[0] + 1.0, p[1] - 0.2],
            velocity: [v[0] + 0.1, v[1] - 0.5],
        };
        let u2 = control_input(&cfg, &reference, &off2, 1.3).unwrap();
        let u1 = control_input(&cfg, &reference, &off1, 1.3).unwrap();
        assert_relative_eq!(u2[0], 2.0 * u1[0], epsilon = 1e-12);
        assert_relative_eq!(u2[1], 2.0 * u1[1], epsilon = 1e-12);
        assert!(control_input(&cfg, &reference, &on_ref, -0.5).is_err());
    }

    fn short(duration: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.duration = duration;
        cfg
    }

    #[test]
    fn invalid_config_is_reported() {
        let mut cfg = short(0.1);
        cfg.window.trigger_distance = -1.0;
        assert!(matches!(run_scenario(&cfg), Err(SimulationError::Config(_))));
    }

    #[test]
    fn trace_shape() {
        let mut cfg = short(0.5);
        cfg.scenario.record_every = 10;
        let run = run_scenario(&cfg).unwrap();
        assert_eq!(run.trace.len(), 501);
        assert_eq!(run.trace.rows[0].window_event, 1);
        let dt = run.trace.rows[1].t - run.trace.rows[0].t;
        assert_relative_eq!(dt, 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_same_trace() {
        let a = run_scenario(&short(1.0).with_seed(3)).unwrap();
        let b = run_scenario(&short(1.0).with_seed(3)).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = run_scenario(&short(1.0).with_seed(4)).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn parked_agent_without_noise() {
        let mut cfg = short(2.0);
        cfg.scenario.noise_variance = 0.0;
        cfg.scenario.reference.waypoints = vec![[5.0, 4.0]];
        let run = run_scenario(&cfg).unwrap();
        let last = run.trace.rows.last().unwrap();
        assert!((last.zhat1 - last.hs_true).abs() < 1e-6);
        assert!(last.zhat2.abs() < 1e-4);
        assert_eq!(run.window.len(), 1);
    }
}
