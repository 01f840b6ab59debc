//! Fixed-capacity sample window with state-distance triggered insertion.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub state: Vec<f64>,
    /// Observer outputs `z_hat_1 .. z_hat_r` at `time`.
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow {
    capacity: usize,
    trigger_distance: f64,
    samples: VecDeque<Sample>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl SlidingWindow {
    pub fn new(capacity: usize, trigger_distance: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("window capacity must be at least 1".into()));
        }
        if !(trigger_distance > 0.0 && trigger_distance.is_finite()) {
            return Err(Error::Argument(format!(
                "window trigger distance must be positive, got {trigger_distance}"
            )));
        }
        Ok(Self {
            capacity,
            trigger_distance,
            samples: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn trigger_distance(&self) -> f64 {
        self.trigger_distance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.samples.back().map(|s| s.state.as_slice())
    }

    pub fn first_time(&self) -> Option<f64> {
        self.samples.front().map(|s| s.time)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.back().map(|s| s.time)
    }

    /// Whether a sample at state `x` would pass the trigger.
    pub fn would_accept(&self, x: &[f64]) -> bool {
        match self.last_state() {
            None => true,
            Some(last) => distance(x, last) > self.trigger_distance,
        }
    }

    /// Offers a sample; returns whether it was stored.
    ///
    /// The first sample is always accepted. Later ones need
    /// `|x - last_state| > trigger_distance`; on acceptance the oldest sample
    /// is evicted once the window is over capacity.
    pub fn offer_sample(&mut self, t: f64, x: &[f64], z_hat: &[f64]) -> Result<bool> {
        if let Some(last) = self.samples.back() {
            if !(t > last.time) {
                return Err(Error::Argument(format!(
                    "sample time {t} does not follow the last stored time {}",
                    last.time
                )));
            }
            check_dim("window sample state", last.state.len(), x.len())?;
            check_dim("window sample targets", last.targets.len(), z_hat.len())?;
        }
        if !self.would_accept(x) {
            return Ok(false);
        }
        self.samples.push_back(Sample {
            time: t,
            state: x.to_vec(),
            targets: z_hat.to_vec(),
        });
        if self.samples.len() > self.capacity {
            self.samples.pop_front();
        }
        Ok(true)
    }

    /// Dataset of stored states against observer component `k` (0-based:
    /// `k = 0` is the output itself, `k = 1` its first derivative, ...).
    pub fn as_dataset(&self, k: usize, noise_variance: f64) -> Result<Dataset> {
        let order = match self.samples.front() {
            None => return Err(Error::State("cannot build a dataset from an empty window".into())),
            Some(s) => s.targets.len(),
        };
        if k >= order {
            return Err(Error::Argument(format!(
                "derivative order {k} out of range for {order} observer outputs"
            )));
        }
        Dataset::new(
            self.samples.iter().map(|s| s.state.clone()).collect(),
            self.samples.iter().map(|s| s.targets[k]).collect(),
            noise_variance,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{fit, KernelParams};
    use proptest::prelude::*;

    #[test]
    fn first_sample_is_accepted() {
        let mut w = SlidingWindow::new(3, 0.2).unwrap();
        assert!(w.offer_sample(0.0, &[0.0, 0.0], &[1.0, 2.0]).unwrap());
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn trigger_is_strict() {
        let mut w = SlidingWindow::new(3, 0.2).unwrap();
        w.offer_sample(0.0, &[0.0], &[1.0]).unwrap();
        assert!(!w.offer_sample(0.1, &[0.1], &[1.0]).unwrap());
        assert!(!w.offer_sample(0.2, &[0.2], &[1.0]).unwrap());
        assert_eq!(w.len(), 1);
        assert!(w.offer_sample(0.3, &[0.2000001], &[1.0]).unwrap());
    }

    #[test]
    fn fifo_eviction() {
        let mut w = SlidingWindow::new(3, 0.5).unwrap();
        for i in 0..4 {
            assert!(w.offer_sample(i as f64, &[i as f64], &[i as f64]).unwrap());
        }
        assert_eq!(w.len(), 3);
        let times: Vec<f64> = w.samples().map(|s| s.time).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_time_reversal_and_bad_dims() {
        let mut w = SlidingWindow::new(3, 0.5).unwrap();
        w.offer_sample(1.0, &[0.0], &[0.0, 0.0]).unwrap();
        assert!(w.offer_sample(1.0, &[5.0], &[0.0, 0.0]).is_err());
        assert!(w.offer_sample(2.0, &[5.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(w.offer_sample(2.0, &[5.0], &[0.0]).is_err());
        assert!(SlidingWindow::new(0, 0.5).is_err());
        assert!(SlidingWindow::new(2, 0.0).is_err());
    }

    #[test]
    fn dataset_columns() {
        let mut w = SlidingWindow::new(4, 0.1).unwrap();
        w.offer_sample(0.0, &[0.0], &[10.0, 20.0]).unwrap();
        w.offer_sample(1.0, &[1.0], &[11.0, 21.0]).unwrap();
        let d0 = w.as_dataset(0, 0.01).unwrap();
        let d1 = w.as_dataset(1, 0.01).unwrap();
        assert_eq!(d0.targets, vec![10.0, 11.0]);
        assert_eq!(d1.targets, vec![20.0, 21.0]);
        assert_eq!(d1.inputs, vec![vec![0.0], vec![1.0]]);
        assert!(matches!(w.as_dataset(2, 0.01), Err(Error::Argument(_))));
        let empty = SlidingWindow::new(4, 0.1).unwrap();
        assert!(matches!(empty.as_dataset(0, 0.01), Err(Error::State(_))));
    }

    #[test]
    fn single_sample_window_reproduces_closed_form() {
        let mut w = SlidingWindow::new(4, 0.1).unwrap();
        w.offer_sample(0.0, &[0.0], &[2.0, -4.0]).unwrap();
        let gp = fit(KernelParams::unit(1), w.as_dataset(0, 1.0).unwrap()).unwrap();
        assert!((gp.mean(&[0.0]).unwrap() - 1.0).abs() < 1e-15);
        let gp1 = fit(KernelParams::unit(1), w.as_dataset(1, 1.0).unwrap()).unwrap();
        assert!((gp1.mean(&[0.0]).unwrap() + 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stored_states_are_separated(
            steps in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..120),
            capacity in 1usize..12,
        ) {
            let tau = 0.2;
            let mut w = SlidingWindow::new(capacity, tau).unwrap();
            let mut x = [0.0, 0.0];
            let mut accepted = 0usize;
            for (i, (dx, dy)) in steps.iter().enumerate() {
                x[0] += dx;
                x[1] += dy;
                let z = [i as f64, -(i as f64), 0.5 * i as f64];
                if w.offer_sample(i as f64, &x, &z).unwrap() {
                    accepted += 1;
                }
                prop_assert_eq!(w.len(), accepted.min(capacity));
            }
            let stored: Vec<&Sample> = w.samples().collect();
            for pair in stored.windows(2) {
                prop_assert!(distance(&pair[0].state, &pair[1].state) > tau);
                prop_assert!(pair[1].time > pair[0].time);
            }
            for k in 0..3 {
                let d = w.as_dataset(k, 0.1).unwrap();
                let expected: Vec<f64> = stored.iter().map(|s| s.targets[k]).collect();
                prop_assert_eq!(d.targets, expected);
            }
        }
    }
}
