//! Run configuration, one section per subsystem. Every field has a default,
//! so a config file only needs to list what it changes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundSettings;
use crate::gp::KernelParams;
use crate::observer::ObserverConfig;
use crate::scenario::field::Obstacle;
use crate::scenario::reference::ReferenceConfig;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("`{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a non-negative finite number, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub kp: f64,
    pub kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub obstacles: Vec<Obstacle>,
    /// Exponent of the smooth minimum; negative values select the nearest obstacle.
    pub smoothing: f64,
    pub controller: ControllerGains,
    pub reference: ReferenceConfig,
    /// Variance of the additive Gaussian output noise, held per step.
    pub noise_variance: f64,
    pub duration: f64,
    /// Integration step shared by the agent and the observer.
    pub dt: f64,
    pub seed: u64,
    /// `(p_x, p_y, v_x, v_y)` at `t = 0`; defaults to the reference state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<[f64; 4]>,
    /// Start of the post-transient interval used by error summaries.
    pub transient: f64,
    /// Record every n-th integration step in the trace.
    pub record_every: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            obstacles: vec![
                Obstacle {
                    center: [0.0, 1.5],
                    radius: 0.7,
                },
                Obstacle {
                    center: [0.0, -1.5],
                    radius: 0.7,
                },
            ],
            smoothing: -5.0,
            controller: ControllerGains { kp: 8.0, kv: 2.0 },
            reference: ReferenceConfig {
                waypoints: vec![[-3.0, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, -3.5]],
                period: 20.0,
            },
            noise_variance: 0.001,
            duration: 20.0,
            dt: 1e-4,
            seed: 0,
            initial_state: None,
            transient: 5.0,
            record_every: 1,
        }
    }
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            gains: vec![8.0, 15.0],
            scale: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub capacity: usize,
    pub trigger_distance: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            capacity: 10,
            trigger_distance: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub amplitude: f64,
    /// One per state coordinate `(p_x, p_y, v_x, v_y)`.
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            length_scales: vec![1.0; 4],
            noise_variance: 0.01,
        }
    }
}

impl GpConfig {
    pub fn kernel(&self) -> KernelParams {
        KernelParams {
            amplitude: self.amplitude,
            length_scales: self.length_scales.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Covering radius; half the window trigger distance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Failure probability of the envelope.
    pub confidence_param: f64,
    pub tube_radius: f64,
    /// Time between tube centres taken from the trajectory, seconds.
    pub query_spacing: f64,
    /// Extra query points drawn inside the tube ball around each centre.
    pub queries_per_center: usize,
    /// Step of the finite-difference Lipschitz estimate of the target.
    pub lipschitz_step: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            rho: None,
            confidence_param: 0.1,
            tube_radius: 0.05,
            query_spacing: 0.01,
            queries_per_center: 2,
            lipschitz_step: 1e-5,
        }
    }
}

/// Everything a simulation run needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: SceneConfig,
    pub observer: ObserverConfig,
    pub window: WindowConfig,
    pub gp: GpConfig,
    pub bounds: BoundsConfig,
}

impl ScenarioConfig {
    /// Fills derived defaults (currently `bounds.rho`).
    pub fn resolved(mut self) -> Self {
        if self.bounds.rho.is_none() {
            self.bounds.rho = Some(self.window.trigger_distance / 2.0);
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    pub fn bound_settings(&self) -> BoundSettings {
        BoundSettings {
            rho: self.bounds.rho.unwrap_or(self.window.trigger_distance / 2.0),
            confidence_param: self.bounds.confidence_param,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.obstacles.is_empty() {
            return Err(invalid("scenario.obstacles", "at least one obstacle is required"));
        }
        for (i, o) in s.obstacles.iter().enumerate() {
            positive(&format!("scenario.obstacles[{i}].radius"), o.radius)?;
            if !o.center.iter().all(|c| c.is_finite()) {
                return Err(invalid(&format!("scenario.obstacles[{i}].center"), "must be finite"));
            }
        }
        if !s.smoothing.is_finite() {
            return Err(invalid("scenario.smoothing", "must be finite"));
        }
        positive("scenario.controller.kp", s.controller.kp)?;
        positive("scenario.controller.kv", s.controller.kv)?;
        if s.reference.waypoints.is_empty() {
            return Err(invalid("scenario.reference.waypoints", "at least one waypoint is required"));
        }
        if !s.reference.waypoints.iter().flatten().all(|c| c.is_finite()) {
            return Err(invalid("scenario.reference.waypoints", "must be finite"));
        }
        positive("scenario.reference.period", s.reference.period)?;
        non_negative("scenario.noise_variance", s.noise_variance)?;
        positive("scenario.duration", s.duration)?;
        positive("scenario.dt", s.dt)?;
        non_negative("scenario.transient", s.transient)?;
        if s.record_every == 0 {
            return Err(invalid("scenario.record_every", "must be at least 1"));
        }
        if let Some(x0) = s.initial_state {
            if !x0.iter().all(|c| c.is_finite()) {
                return Err(invalid("scenario.initial_state", "must be finite"));
            }
        }

        self.observer
            .validate()
            .map_err(|e| invalid("observer.gains", e.to_string()))?;
        positive("observer.scale", self.observer.scale)?;
        self.observer
            .check_step(s.dt)
            .map_err(|e| invalid("observer.scale", e.to_string()))?;

        if self.window.capacity == 0 {
            return Err(invalid("window.capacity", "must be at least 1"));
        }
        positive("window.trigger_distance", self.window.trigger_distance)?;

        positive("gp.amplitude", self.gp.amplitude)?;
        if self.gp.length_scales.len() != 4 {
            return Err(invalid(
                "gp.length_scales",
                format!("needs one entry per state coordinate (4), got {}", self.gp.length_scales.len()),
            ));
        }
        for (i, l) in self.gp.length_scales.iter().enumerate() {
            positive(&format!("gp.length_scales[{i}]"), *l)?;
        }
        non_negative("gp.noise_variance", self.gp.noise_variance)?;

        let b = &self.bounds;
        if let Some(rho) = b.rho {
            positive("bounds.rho", rho)?;
        }
        if !(b.confidence_param > 0.0 && b.confidence_param < 1.0) {
            return Err(invalid(
                "bounds.confidence_param",
                format!("must lie in (0, 1), got {}", b.confidence_param),
            ));
        }
        non_negative("bounds.tube_radius", b.tube_radius)?;
        positive("bounds.query_spacing", b.query_spacing)?;
        positive("bounds.lipschitz_step", b.lipschitz_step)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: ScenarioConfig = toml::from_str("[window]\ncapacity = 7\n").unwrap();
        assert_eq!(cfg.window.capacity, 7);
        assert_eq!(cfg.window.trigger_distance, 0.2);
        assert_eq!(cfg.observer.gains, vec![8.0, 15.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<ScenarioConfig>("[window]\ncapasity = 7\n").is_err());
    }

    #[test]
    fn round_trip_of_resolved_config() {
        let cfg = ScenarioConfig::default().resolved();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ScenarioConfig::default();
        cfg.window.trigger_distance = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "window.trigger_distance");

        let mut cfg = ScenarioConfig::default();
        cfg.observer.gains = vec![1.0, 1.0, 5.0];
        assert_eq!(cfg.validate().unwrap_err().field, "observer.gains");

        let mut cfg = ScenarioConfig::default();
        cfg.observer.scale = 2000.0;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "observer.scale");
        assert!(err.message.contains("1/(2 l max_root)"));

        let mut cfg = ScenarioConfig::default();
        cfg.bounds.confidence_param = 1.0;
        assert_eq!(cfg.validate().unwrap_err().field, "bounds.confidence_param");
    }
}
