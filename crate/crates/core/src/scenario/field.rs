//! Disc obstacles and the smoothed nearest-obstacle squared distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Argument(format!(
                "obstacle needs a finite centre and positive radius, got {center:?}, {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Squared distance from `p` to the disc and its gradient in `p`.
    pub fn squared_distance_with_gradient(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let d = dx.hypot(dy);
        let gap = d - self.radius;
        if gap <= 0.0 {
            return (0.0, [0.0, 0.0]);
        }
        let s = 2.0 * gap / d;
        (gap * gap, [s * dx, s * dy])
    }

    pub fn squared_distance(&self, p: [f64; 2]) -> f64 {
        self.squared_distance_with_gradient(p).0
    }
}

pub fn squared_distance(obstacle: &Obstacle, p: [f64; 2]) -> f64 {
    obstacle.squared_distance(p)
}

/// Normalised exponential weights `exp(alpha v_i) / sum_j exp(alpha v_j)`,
/// shifted by the largest exponent so nothing overflows.
fn soft_weights(values: &[f64], alpha: f64) -> Vec<f64> {
    let top = values
        .iter()
        .map(|v| alpha * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = values.iter().map(|v| (alpha * v - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `sum v_i e^(alpha v_i) / sum e^(alpha v_i)`; tends to the minimum as
/// `alpha -> -inf` and the maximum as `alpha -> +inf`.
pub fn smooth_min(values: &[f64], alpha: f64) -> f64 {
    assert!(!values.is_empty(), "smooth_min of an empty slice");
    soft_weights(values, alpha)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// `h_s(p)` over the obstacles together with its gradient in `p`.
pub fn smoothed_distance(obstacles: &[Obstacle], alpha: f64, p: [f64; 2]) -> (f64, [f64; 2]) {
    let (values, grads): (Vec<f64>, Vec<[f64; 2]>) = obstacles
        .iter()
        .map(|o| o.squared_distance_with_gradient(p))
        .unzip();
    let w = soft_weights(&values, alpha);
    let hs: f64 = w.iter().zip(&values).map(|(w, v)| w * v).sum();
    // d h_s = sum_i w_i (1 + alpha (h_i - h_s)) d h_i
    let mut grad = [0.0, 0.0];
    for ((wi, hi), gi) in w.iter().zip(&values).zip(&grads) {
        let c = wi * (1.0 + alpha * (hi - hs));
        grad[0] += c * gi[0];
        grad[1] += c * gi[1];
    }
    (hs, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disc_distance_examples() {
        let o = Obstacle::new([1.0, -2.0], 0.5).unwrap();
        assert_eq!(o.squared_distance([1.0, -2.0]), 0.0);
        assert_eq!(o.squared_distance([1.5, -2.0]), 0.0);
        assert_relative_eq!(o.squared_distance([1.0, 0.5]), 4.0, epsilon = 1e-14);
        assert!(Obstacle::new([0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn smooth_min_examples() {
        assert_relative_eq!(smooth_min(&[0.7, 0.7, 0.7], -5.0), 0.7, epsilon = 1e-15);
        assert_relative_eq!(smooth_min(&[0.7, 0.7], 5.0), 0.7, epsilon = 1e-15);
        assert_eq!(smooth_min(&[3.2], -5.0), 3.2);
        assert!((smooth_min(&[1.0, 2.0], -50.0) - 1.0).abs() < 1e-15);
        // no overflow for large exponents
        assert!((smooth_min(&[1000.0, 2000.0], -50.0) - 1000.0).abs() < 1e-12);
        assert!((smooth_min(&[1000.0, 2000.0], 50.0) - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_distance_gradient_matches_finite_differences() {
        let obstacles = [
            Obstacle::new([0.0, 1.5], 0.7).unwrap(),
            Obstacle::new([0.0, -1.5], 0.7).unwrap(),
            Obstacle::new([2.0, 0.4], 0.3).unwrap(),
        ];
        for p in [[0.3, 0.2], [-1.0, -0.4], [1.1, 0.9], [2.6, 0.1]] {
            let (_, g) = smoothed_distance(&obstacles, -5.0, p);
            let h = 1e-6;
            for i in 0..2 {
                let mut up = p;
                let mut dn = p;
                up[i] += h;
                dn[i] -= h;
                let fd = (smoothed_distance(&obstacles, -5.0, up).0 - smoothed_distance(&obstacles, -5.0, dn).0)
                    / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }
}
