//! Closed C1 reference loop: cubic Hermite segments through waypoints with
//! Catmull-Rom tangents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub waypoints: Vec<[f64; 2]>,
    /// Time to traverse the whole loop, seconds.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLoop {
    waypoints: Vec<[f64; 2]>,
    segment_time: f64,
    /// Velocity at each waypoint.
    tangents: Vec<[f64; 2]>,
}

impl ReferenceLoop {
    pub fn new(config: &ReferenceConfig) -> Result<Self> {
        let n = config.waypoints.len();
        if n == 0 {
            return Err(Error::Argument("reference needs at least one waypoint".into()));
        }
        if !(config.period > 0.0 && config.period.is_finite()) {
            return Err(Error::Argument(format!(
                "reference period must be positive, got {}",
                config.period
            )));
        }
        let segment_time = config.period / n as f64;
        let w = &config.waypoints;
        let tangents = (0..n)
            .map(|i| {
                let next = w[(i + 1) % n];
                let prev = w[(i + n - 1) % n];
                [
                    (next[0] - prev[0]) / (2.0 * segment_time),
                    (next[1] - prev[1]) / (2.0 * segment_time),
                ]
            })
            .collect();
        Ok(Self {
            waypoints: config.waypoints.clone(),
            segment_time,
            tangents,
        })
    }

    /// Desired position and velocity at time `t >= 0`.
    pub fn sample(&self, t: f64) -> Result<([f64; 2], [f64; 2])> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Argument(format!("reference is defined for t >= 0, got {t}")));
        }
        let n = self.waypoints.len();
        let dt = self.segment_time;
        let cycles = t / dt;
        let seg = cycles.floor();
        let s = cycles - seg;
        let i = (seg as u64 % n as u64) as usize;
        let j = (i + 1) % n;
        let (p0, p1) = (self.waypoints[i], self.waypoints[j]);
        let (m0, m1) = (self.tangents[i], self.tangents[j]);

        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;

        let mut pos = [0.0; 2];
        let mut vel = [0.0; 2];
        for k in 0..2 {
            pos[k] = h00 * p0[k] + h10 * dt * m0[k] + h01 * p1[k] + h11 * dt * m1[k];
            vel[k] = (d00 * p0[k] + d01 * p1[k]) / dt + d10 * m0[k] + d11 * m1[k];
        }
        Ok((pos, vel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> ReferenceLoop {
        ReferenceLoop::new(&ReferenceConfig {
            waypoints: vec![[-3.0, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, -3.5]],
            period: 20.0,
        })
        .unwrap()
    }

    #[test]
    fn passes_through_waypoints_and_is_periodic() {
        let r = square();
        assert_eq!(r.sample(0.0).unwrap().0, [-3.0, 0.0]);
        let (p, _) = r.sample(5.0).unwrap();
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-12);
        let (a, va) = r.sample(3.3).unwrap();
        let (b, vb) = r.sample(23.3).unwrap();
        for k in 0..2 {
            assert_relative_eq!(a[k], b[k], epsilon = 1e-9);
            assert_relative_eq!(va[k], vb[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn velocity_is_the_time_derivative_and_continuous() {
        let r = square();
        let h = 1e-6;
        for t in [0.3, 4.999, 5.0, 7.7, 14.2, 19.9999] {
            let (_, v) = r.sample(t).unwrap();
            let (pu, _) = r.sample(t + h).unwrap();
            let (pd, _) = r.sample(t - h).unwrap();
            for k in 0..2 {
                assert_relative_eq!(v[k], (pu[k] - pd[k]) / (2.0 * h), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn constant_reference_and_domain() {
        let r = ReferenceLoop::new(&ReferenceConfig {
            waypoints: vec![[1.0, 2.0]],
            period: 10.0,
        })
        .unwrap();
        assert_eq!(r.sample(7.3).unwrap(), ([1.0, 2.0], [0.0, 0.0]));
        assert!(r.sample(-1.0).is_err());
        assert!(r.sample(f64::NAN).is_err());
    }
}
