//! High-gain observer for a chain of `r` integrators driven by a scalar output.
//!
//! The estimate `z_hat[i]` tracks the `i`-th time derivative of the measured
//! output. Correction gains scale as `l^i`:
//!
//! ```text
//! dz_i/dt = z_{i+1} + l^i k_i (y - z_1)    i < r
//! dz_r/dt =           l^r k_r (y - z_1)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Roots of `s^r + k_1 s^(r-1) + ... + k_r`, from the companion matrix.
pub fn gain_polynomial_roots(gains: &[f64]) -> Vec<nalgebra::Complex<f64>> {
    let r = gains.len();
    if r == 0 {
        return Vec::new();
    }
    let companion = DMatrix::from_fn(r, r, |i, j| {
        if i == 0 {
            -gains[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion.complex_eigenvalues().iter().copied().collect()
}

/// True iff every root of the gain polynomial has a strictly negative real part.
pub fn check_hurwitz(gains: &[f64]) -> bool {
    !gains.is_empty()
        && gains.iter().all(|k| k.is_finite())
        && gain_polynomial_roots(gains).iter().all(|z| z.re < 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    /// `k_1 .. k_r`; the observer order is `gains.len()`.
    pub gains: Vec<f64>,
    /// High-gain scale `l`.
    pub scale: f64,
}

impl ObserverConfig {
    pub fn new(gains: Vec<f64>, scale: f64) -> Result<Self> {
        let config = Self { gains, scale };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::Argument("observer needs at least one gain".into()));
        }
        if let Some(k) = self.gains.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::Argument(format!("observer gains must be positive, got {k}")));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Argument(format!(
                "observer scale must be positive, got {}",
                self.scale
            )));
        }
        if !check_hurwitz(&self.gains) {
            return Err(Error::Argument(format!(
                "observer gains {:?} do not give a Hurwitz polynomial",
                self.gains
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.gains.len()
    }

    /// Magnitude of the fastest error-dynamics mode, `l * max |root|`.
    pub fn fastest_mode(&self) -> f64 {
        self.scale
            * gain_polynomial_roots(&self.gains)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
    }

    /// Decay rate of the slowest error-dynamics mode, `l * min |Re root|`.
    pub fn convergence_rate(&self) -> f64 {
        self.scale
            * gain_polynomial_roots(&self.gains)
                .iter()
                .map(|z| -z.re)
                .fold(f64::INFINITY, f64::min)
    }

    /// Five time constants of the slowest mode.
    pub fn warm_up_time(&self) -> f64 {
        5.0 / self.convergence_rate()
    }

    /// Largest admissible integration step, `1 / (2 l max |root|)`.
    pub fn max_step(&self) -> f64 {
        1.0 / (2.0 * self.fastest_mode())
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        let max = self.max_step();
        if dt > 0.0 && dt <= max {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "integration step {dt} s violates the observer stability rule dt <= 1/(2 l max_root) = {max:.3e} s"
            )))
        }
    }
}

pub fn estimate_convergence_rate(config: &ObserverConfig) -> f64 {
    config.convergence_rate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    pub z_hat: Vec<f64>,
    pub time: f64,
}

impl ObserverState {
    /// `z_hat = (y0, 0, ..., 0)` at `time`.
    pub fn initial(config: &ObserverConfig, y0: f64, time: f64) -> Self {
        let mut z_hat = vec![0.0; config.order()];
        z_hat[0] = y0;
        Self { z_hat, time }
    }
}

/// Right-hand side of the observer ODE at estimate `z_hat` for output `y`.
pub fn observer_derivative(config: &ObserverConfig, z_hat: &[f64], y: f64) -> Vec<f64> {
    let r = config.order();
    let innovation = y - z_hat[0];
    let mut gain_scale = 1.0;
    (0..r)
        .map(|i| {
            gain_scale *= config.scale;
            let chain = if i + 1 < r { z_hat[i + 1] } else { 0.0 };
            chain + gain_scale * config.gains[i] * innovation
        })
        .collect()
}

/// One classical RK4 step of length `dt`, sampling the output at each stage time.
pub fn observer_step<F>(
    config: &ObserverConfig,
    state: &ObserverState,
    y_sampler: F,
    dt: f64,
) -> Result<ObserverState>
where
    F: Fn(f64) -> f64,
{
    let t = state.time;
    let z = &state.z_hat;
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { z.iter().zip(k).map(|(zi, ki)| zi + a * ki).collect() };

    let k1 = observer_derivative(config, z, y_sampler(t));
    let k2 = observer_derivative(config, &axpy(0.5 * dt, &k1), y_sampler(t + 0.5 * dt));
    let k3 = observer_derivative(config, &axpy(0.5 * dt, &k2), y_sampler(t + 0.5 * dt));
    let k4 = observer_derivative(config, &axpy(dt, &k3), y_sampler(t + dt));

    let z_hat: Vec<f64> = (0..z.len())
        .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let time = t + dt;
    if z_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time, state: z_hat });
    }
    Ok(ObserverState { z_hat, time })
}

/// An observer bound to its configuration and integration step.
#[derive(Debug, Clone)]
pub struct HighGainObserver {
    config: ObserverConfig,
    state: ObserverState,
    dt: f64,
}

impl HighGainObserver {
    pub fn new(config: ObserverConfig, initial: ObserverState, dt: f64) -> Result<Self> {
        config.validate()?;
        config.check_step(dt)?;
        if initial.z_hat.len() != config.order() {
            return Err(Error::Argument(format!(
                "initial observer state has {} components, order is {}",
                initial.z_hat.len(),
                config.order()
            )));
        }
        Ok(Self {
            config,
            state: initial,
            dt,
        })
    }

    pub fn config(&self) -> &ObserverConfig {
        &self.config
    }

    pub fn state(&self) -> &ObserverState {
        &self.state
    }

    pub fn estimates(&self) -> &[f64] {
        &self.state.z_hat
    }

    /// Advances one step holding the measurement `y` over the whole step.
    pub fn step_held(&mut self, y: f64) -> Result<&ObserverState> {
        self.state = observer_step(&self.config, &self.state, |_| y, self.dt)?;
        Ok(&self.state)
    }

    pub fn step_with<F: Fn(f64) -> f64>(&mut self, y_sampler: F) -> Result<&ObserverState> {
        self.state = observer_step(&self.config, &self.state, y_sampler, self.dt)?;
        Ok(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_gains(scale: f64) -> ObserverConfig {
        ObserverConfig::new(vec![8.0, 15.0], scale).unwrap()
    }

    #[test]
    fn hurwitz_examples() {
        assert!(check_hurwitz(&[8.0, 15.0]));
        assert!(!check_hurwitz(&[-1.0]));
        assert!(check_hurwitz(&[2.0, 1.0]));
        assert!(check_hurwitz(&[1.0]));
        // s^2 + 0 s + 1 has roots on the imaginary axis
        assert!(!check_hurwitz(&[0.0, 1.0]));
        assert!(!check_hurwitz(&[]));

        let mut roots: Vec<f64> = gain_polynomial_roots(&[8.0, 15.0]).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        assert_relative_eq!(roots[0], -5.0, epsilon = 1e-12);
        assert_relative_eq!(roots[1], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn construction_rejects_bad_gains() {
        assert!(ObserverConfig::new(vec![8.0, 15.0], 20.0).is_ok());
        assert!(ObserverConfig::new(vec![-1.0], 1.0).is_err());
        // positive gains, but s^3 + s^2 + s + 5 is not Hurwitz (k1 k2 < k3)
        assert!(ObserverConfig::new(vec![1.0, 1.0, 5.0], 1.0).is_err());
        assert!(ObserverConfig::new(vec![8.0, 15.0], 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let c = default_gains(20.0);
        assert_eq!(observer_derivative(&c, &[0.7, 0.0], 0.7), vec![0.0, 0.0]);
        let c1 = default_gains(1.0);
        assert_eq!(observer_derivative(&c1, &[0.0, 0.0], 1.0), vec![8.0, 15.0]);
        assert_eq!(observer_derivative(&c1, &[0.0, 3.0], 0.0), vec![3.0, 0.0]);
    }

    #[test]
    fn convergence_rate_examples() {
        assert_relative_eq!(default_gains(20.0).convergence_rate(), 60.0, epsilon = 1e-9);
        assert_relative_eq!(default_gains(40.0).convergence_rate(), 120.0, epsilon = 1e-9);
        let double = ObserverConfig::new(vec![2.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(estimate_convergence_rate(&double), 1.0, epsilon = 1e-6);
        assert_relative_eq!(default_gains(20.0).warm_up_time(), 5.0 / 60.0, epsilon = 1e-9);
    }

    #[test]
    fn step_rule() {
        let c = default_gains(20.0);
        assert_relative_eq!(c.max_step(), 1.0 / 200.0, epsilon = 1e-12);
        assert!(c.check_step(1e-4).is_ok());
        assert!(c.check_step(0.01).is_err());
        assert!(c.check_step(0.0).is_err());
        let init = ObserverState::initial(&c, 0.0, 0.0);
        assert!(HighGainObserver::new(c, init, 0.01).is_err());
    }

    #[test]
    fn equilibrium_is_preserved_exactly() {
        let c = default_gains(20.0);
        let mut obs = HighGainObserver::new(c.clone(), ObserverState::initial(&c, 0.37, 0.0), 1e-4).unwrap();
        for _ in 0..100_000 {
            obs.step_held(0.37).unwrap();
        }
        assert_eq!(obs.estimates(), &[0.37, 0.0]);
    }

    #[test]
    fn converges_to_constant_output() {
        let c = default_gains(20.0);
        let mut obs = HighGainObserver::new(c.clone(), ObserverState::initial(&c, 0.0, 0.0), 1e-4).unwrap();
        for _ in 0..10_000 {
            obs.step_held(1.0).unwrap();
        }
        assert_relative_eq!(obs.state().time, 1.0, epsilon = 1e-9);
        assert!((obs.estimates()[0] - 1.0).abs() < 1e-6);
        assert!(obs.estimates()[1].abs() < 1e-6);
    }

    #[test]
    fn tracks_a_ramp_slope() {
        let c = default_gains(20.0);
        let mut obs = HighGainObserver::new(c.clone(), ObserverState::initial(&c, 0.0, 0.0), 1e-4).unwrap();
        for _ in 0..20_000 {
            obs.step_with(|t| t).unwrap();
        }
        let t = obs.state().time;
        assert!((obs.estimates()[0] - t).abs() < 1e-8);
        assert!((obs.estimates()[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn divergence_is_reported() {
        let c = default_gains(20.0);
        let state = ObserverState::initial(&c, 0.0, 0.0);
        let err = observer_step(&c, &state, |_| f64::NAN, 1e-4).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
