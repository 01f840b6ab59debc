//! Computable error bounds for windowed GP regressors on a trajectory tube.
//!
//! The pieces are
//! * a covering-number upper bound for the tube around a sampled trajectory,
//! * the confidence scaling `beta = 2 ln(M / confidence)` and the
//!   discretisation slack `alpha = (L_f + L_mu) rho + sqrt(beta L_var rho)`,
//! * Lipschitz bounds for the posterior mean and variance,
//! * the gap between a regressor trained on observer outputs and one
//!   trained on the exact derivative values at the same inputs,
//!   `kappa_max * |(K + s I)^-1| * |Y_hat - Y|`.
//!
//! They combine into the pointwise envelope
//! `sqrt(beta) * sigma(x) + alpha + gap`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::GpPosterior;

/// Upper limit on polyline vertices examined for a single covering scale.
const MAX_COVER_VERTICES: usize = 1 << 20;
/// Number of fixed centre-line scales tried when the tube radius is large.
const LADDER_STEPS: i32 = 48;
const GROUP_SLACK: f64 = 1e-12;

/// Union of closed balls of radius `radius` around a sampled trajectory.
///
/// Consecutive centres are joined by straight segments when covering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTube {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    /// Largest time gap between consecutive centres.
    pub sample_spacing: f64,
}

impl TrajectoryTube {
    pub fn new(centers: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        let tube = Self {
            centers,
            radius,
            sample_spacing: 0.0,
        };
        tube.validate()?;
        Ok(tube)
    }

    /// Tube around `points[i]` sampled at `times[i]`.
    pub fn from_samples(times: &[f64], points: Vec<Vec<f64>>, radius: f64) -> Result<Self> {
        check_dim("tube sample times", points.len(), times.len())?;
        let sample_spacing = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let tube = Self {
            centers: points,
            radius,
            sample_spacing,
        };
        tube.validate()?;
        Ok(tube)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .centers
            .first()
            .ok_or_else(|| Error::Argument("trajectory tube has no centres".into()))?;
        if first.is_empty() {
            return Err(Error::Argument("tube centres must have dimension >= 1".into()));
        }
        for c in &self.centers {
            check_dim("tube centre", first.len(), c.len())?;
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Argument(format!(
                "tube radius must be non-negative, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Half of the bounding-box diagonal of all centres.
    fn half_extent(&self) -> f64 {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for c in &self.centers {
            for i in 0..n {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        0.5 * lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

/// Axis-aligned bounding box that can report its half diagonal.
struct BBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BBox {
    fn at(p: &[f64]) -> Self {
        Self {
            lo: p.to_vec(),
            hi: p.to_vec(),
        }
    }

    fn half_diag_with(&self, p: &[f64]) -> f64 {
        0.5 * self
            .lo
            .iter()
            .zip(&self.hi)
            .zip(p)
            .map(|((lo, hi), x)| {
                let w = hi.max(*x) - lo.min(*x);
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }

    fn extend(&mut self, p: &[f64]) {
        for ((lo, hi), x) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(p) {
            *lo = lo.min(*x);
            *hi = hi.max(*x);
        }
    }
}

/// Minimum number of consecutive arcs of the centre polyline, sharing
/// endpoints, whose bounding boxes have half diagonal at most `radius`. Each
/// arc sits in the ball of that radius around its box centre, so this also
/// counts `radius`-balls covering the centre line. The walk is greedy along
/// the polyline (each arc is extended as far as possible), which is optimal
/// for this family of covers. `None` when more than `cap` arcs (or more
/// than [`MAX_COVER_VERTICES`]) would be needed.
fn centerline_groups(centers: &[Vec<f64>], radius: f64, cap: u64) -> Option<u64> {
    if centers.len() == 1 {
        return Some(1);
    }
    if !(radius > 0.0) {
        return None;
    }
    let tol = radius * (1.0 + GROUP_SLACK);
    let mut groups = 1u64;
    let mut bbox = BBox::at(&centers[0]);
    let mut point = vec![0.0; centers[0].len()];
    let lerp = |a: &[f64], b: &[f64], s: f64, out: &mut Vec<f64>| {
        for (i, p) in out.iter_mut().enumerate() {
            *p = a[i] + s * (b[i] - a[i]);
        }
    };
    for seg in centers.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let mut s0 = 0.0;
        let mut fresh = false;
        while bbox.half_diag_with(b) > tol {
            // largest s in [s0, 1] keeping the arc inside the radius
            let (mut lo, mut hi) = (s0, 1.0);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                lerp(a, b, mid, &mut point);
                if bbox.half_diag_with(&point) <= tol {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if lo <= s0 && fresh {
                // no representable progress at this scale
                return None;
            }
            lerp(a, b, lo, &mut point);
            bbox = BBox::at(&point);
            s0 = lo;
            fresh = true;
            groups += 1;
            if groups > cap || groups as usize > MAX_COVER_VERTICES {
                return None;
            }
        }
        bbox.extend(b);
    }
    Some(groups)
}

/// Number of `rho`-balls covering a ball of radius `r` in `n` dimensions,
/// using the cubic lattice whose cells have half diagonal `rho`.
fn balls_per_ball(r: f64, rho: f64, n: usize) -> f64 {
    if r <= rho {
        return 1.0;
    }
    let side = 2.0 * rho / (n as f64).sqrt();
    (2.0 * r / side).ceil().powi(n as i32)
}

/// Upper bound on the `rho`-covering number of the tube.
///
/// Two constructions are compared and the smaller count returned:
/// centre-line pieces of radius `rho - tube.radius`, each covered by one
/// `rho`-ball; and, for a fixed ladder of centre-line radii `r_k`, pieces of
/// radius `r_k` whose `tube.radius`-dilations are covered by a cubic lattice.
/// Both are monotone in `rho` and in the tube radius, so the result is too.
pub fn covering_number(tube: &TrajectoryTube, rho: f64) -> Result<u64> {
    tube.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Argument(format!("covering radius must be positive, got {rho}")));
    }
    let n = tube.dim();
    let delta = tube.radius;
    let mut best = f64::INFINITY;
    let extent = tube.half_extent();
    if extent > 0.0 {
        for k in 0..=LADDER_STEPS {
            let r_k = extent * 2f64.powf(-0.5 * k as f64);
            let per_arc = balls_per_ball(r_k + delta, rho, n);
            // only arc counts that can beat `best` are worth walking
            let cap = if best.is_finite() { (best / per_arc) as u64 } else { u64::MAX };
            match centerline_groups(&tube.centers, r_k, cap) {
                Some(g) => best = best.min(g as f64 * per_arc),
                // smaller radii need at least as many arcs and one ball each
                None if per_arc <= 1.0 => break,
                None => {}
            }
        }
    } else {
        best = best.min(balls_per_ball(delta, rho, n));
    }
    if delta < rho {
        let cap = if best.is_finite() { best as u64 } else { u64::MAX };
        if let Some(g) = centerline_groups(&tube.centers, rho - delta, cap) {
            best = best.min(g as f64);
        }
    }
    if !best.is_finite() || best > u64::MAX as f64 {
        return Err(Error::Argument(format!(
            "covering number for rho = {rho} exceeds the representable range"
        )));
    }
    Ok(best as u64)
}

/// `beta = 2 ln(M / confidence)` and
/// `alpha = (L_f + L_mu) rho + sqrt(beta L_var rho)`.
pub fn beta_alpha(
    covering: u64,
    confidence_param: f64,
    rho: f64,
    lipschitz_target: f64,
    lipschitz_mean: f64,
    lipschitz_variance: f64,
) -> Result<(f64, f64)> {
    if !(confidence_param > 0.0 && confidence_param < 1.0) {
        return Err(Error::Argument(format!(
            "confidence parameter must lie in (0, 1), got {confidence_param}"
        )));
    }
    if covering == 0 {
        return Err(Error::Argument("covering number must be at least 1".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::Argument(format!("rho must be non-negative, got {rho}")));
    }
    for (name, v) in [
        ("target Lipschitz constant", lipschitz_target),
        ("mean Lipschitz constant", lipschitz_mean),
        ("variance Lipschitz constant", lipschitz_variance),
    ] {
        if !(v >= 0.0) {
            return Err(Error::Argument(format!("{name} must be non-negative, got {v}")));
        }
    }
    let beta = 2.0 * (covering as f64 / confidence_param).ln();
    let alpha = (lipschitz_target + lipschitz_mean) * rho + (beta * lipschitz_variance * rho).sqrt();
    Ok((beta, alpha))
}

/// Lipschitz bounds of the posterior mean and variance:
/// `L_mu = L_k sqrt(N) |w|` and `L_var = 2 rho L_k (1 + N |(K + s I)^-1| k_max)`.
pub fn lipschitz_bounds(
    gp: &GpPosterior,
    lipschitz_kernel: f64,
    kernel_max: f64,
    rho: f64,
) -> Result<(f64, f64)> {
    if gp.is_empty() {
        return Err(Error::State("Lipschitz bounds need a fitted regressor".into()));
    }
    if !(lipschitz_kernel > 0.0 && kernel_max > 0.0) {
        return Err(Error::Argument(
            "kernel Lipschitz constant and maximum must be positive".into(),
        ));
    }
    let n = gp.len() as f64;
    let w_norm = gp.weights().iter().map(|w| w * w).sum::<f64>().sqrt();
    let l_mu = lipschitz_kernel * n.sqrt() * w_norm;
    let l_var = 2.0 * rho * lipschitz_kernel * (1.0 + n * gp.gram_inverse_norm()? * kernel_max);
    Ok((l_mu, l_var))
}

/// `kappa_max * |(K + s I)^-1| * |observer_targets - ideal_targets|`.
///
/// Bounds `sup_x |mean_observer(x) - mean_ideal(x)|` for two regressors that
/// share the inputs and hyperparameters of `gp`. The argument goes through
/// `|(K + s I)^-1 k(x)| <= kappa_max |(K + s I)^-1|`. That step is not a
/// general identity (`|k(x)|` can reach `sqrt(N) kappa_max`); for the
/// squared-exponential kernel it holds in randomized checks while the noise
/// variance `s` stays below about `2 kappa_max`, and fails for much larger
/// noise. Keep `s <= kappa_max`.
pub fn observer_gap(
    gp: &GpPosterior,
    observer_targets: &[f64],
    ideal_targets: &[f64],
    kernel_max: f64,
) -> Result<f64> {
    check_dim("observer targets", gp.len(), observer_targets.len())?;
    check_dim("ideal targets", gp.len(), ideal_targets.len())?;
    let diff = observer_targets
        .iter()
        .zip(ideal_targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(kernel_max * gp.gram_inverse_norm()? * diff)
}

/// Largest finite-difference gradient norm of `f` over `points`.
pub fn sampled_lipschitz<F>(f: F, points: &[Vec<f64>], step: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = 0.0f64;
    let mut x = Vec::new();
    for p in points {
        x.clear();
        x.extend_from_slice(p);
        let mut sq = 0.0;
        for i in 0..p.len() {
            x[i] = p[i] + step;
            let up = f(&x);
            x[i] = p[i] - step;
            let down = f(&x);
            x[i] = p[i];
            let g = (up - down) / (2.0 * step);
            sq += g * g;
        }
        best = best.max(sq.sqrt());
    }
    best
}

/// The observer-to-ideal gap term of the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum GapTerm {
    Computed(f64),
    /// Without the exact derivative values only existential constants bound
    /// the gap.
    NotComputable,
}

impl GapTerm {
    pub fn value(&self) -> Option<f64> {
        match self {
            GapTerm::Computed(v) => Some(*v),
            GapTerm::NotComputable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    pub rho: f64,
    /// Failure probability of the envelope, in `(0, 1)`.
    pub confidence_param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rho: f64,
    pub covering_number: u64,
    pub beta: f64,
    pub alpha: f64,
    pub lipschitz_target: f64,
    pub lipschitz_mean: f64,
    pub lipschitz_variance: f64,
    /// Probability with which the envelope holds, `1 - confidence_param`.
    pub confidence: f64,
    pub observer_gap: GapTerm,
}

impl BoundReport {
    /// `sqrt(beta) sigma(x) + alpha`, the envelope without the gap term.
    pub fn ideal_envelope(&self, gp: &GpPosterior, x: &[f64]) -> Result<f64> {
        Ok(self.beta.sqrt() * gp.variance(x)?.sqrt() + self.alpha)
    }

    /// Full envelope `sqrt(beta) sigma(x) + alpha + gap`.
    pub fn envelope(&self, gp: &GpPosterior, x: &[f64]) -> Result<f64> {
        let gap = self.observer_gap.value().ok_or_else(|| {
            Error::State("gap term is not computable without ground-truth derivative samples".into())
        })?;
        Ok(self.ideal_envelope(gp, x)? + gap)
    }
}

/// Assembles the bound for the regressor `gp` on `tube`.
pub fn composite_bound(
    gp: &GpPosterior,
    tube: &TrajectoryTube,
    settings: &BoundSettings,
    lipschitz_target: f64,
    gap: GapTerm,
) -> Result<BoundReport> {
    tube.validate()?;
    check_dim("tube centres", gp.kernel().dim(), tube.dim())?;
    if let GapTerm::Computed(g) = gap {
        if !(g >= 0.0) {
            return Err(Error::Argument(format!("gap term must be non-negative, got {g}")));
        }
    }
    let kernel = gp.kernel();
    let covering = covering_number(tube, settings.rho)?;
    let (l_mu, l_var) = lipschitz_bounds(
        gp,
        kernel.lipschitz_constant(),
        kernel.max_value(),
        settings.rho,
    )?;
    let (beta, alpha) = beta_alpha(
        covering,
        settings.confidence_param,
        settings.rho,
        lipschitz_target,
        l_mu,
        l_var,
    )?;
    Ok(BoundReport {
        rho: settings.rho,
        covering_number: covering,
        beta,
        alpha,
        lipschitz_target,
        lipschitz_mean: l_mu,
        lipschitz_variance: l_var,
        confidence: 1.0 - settings.confidence_param,
        observer_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{fit, Dataset, KernelParams};
    use approx::assert_relative_eq;

    fn segment(n: usize) -> Vec<Vec<f64>> {
        (0..=n).map(|i| vec![i as f64 / n as f64]).collect()
    }

    /// Exact minimum covering of a 1-D interval of length `len` by `rho`-balls.
    fn interval_cover_oracle(len: f64, rho: f64) -> u64 {
        let mut count = 0;
        let mut covered = 0.0f64;
        let mut first = true;
        while first || covered < len - 1e-12 {
            first = false;
            count += 1;
            covered += 2.0 * rho;
        }
        count
    }

    #[test]
    fn single_point_needs_one_ball() {
        let tube = TrajectoryTube::new(vec![vec![0.3, -1.0, 2.0]], 0.0).unwrap();
        for rho in [1e-3, 0.1, 10.0] {
            assert_eq!(covering_number(&tube, rho).unwrap(), 1);
        }
    }

    #[test]
    fn unit_segment_examples() {
        let tube = TrajectoryTube::new(segment(100), 0.0).unwrap();
        assert_eq!(interval_cover_oracle(1.0, 0.5), 1);
        assert_eq!(covering_number(&tube, 0.5).unwrap(), 1);
        let m = covering_number(&tube, 0.1).unwrap();
        assert_eq!(interval_cover_oracle(1.0, 0.1), 5);
        assert!((5..=7).contains(&m), "got {m}");
        // a two-vertex polyline is subdivided the same way
        let coarse = TrajectoryTube::new(segment(1), 0.0).unwrap();
        assert!((5..=7).contains(&covering_number(&coarse, 0.1).unwrap()));
    }

    #[test]
    fn cover_is_valid_for_dilated_segment() {
        // every tube point must be within rho of some lattice/ball centre; check
        // via the count bound against the volume lower bound
        let tube = TrajectoryTube::new(segment(10), 0.3).unwrap();
        let m = covering_number(&tube, 0.1).unwrap();
        // the 1-D tube is [-0.3, 1.3]: length 1.6 needs at least 8 balls
        assert!(m >= 8, "got {m}");
    }

    #[test]
    fn covering_rejects_bad_input() {
        assert!(TrajectoryTube::new(vec![], 0.0).is_err());
        assert!(TrajectoryTube::new(vec![vec![0.0], vec![0.0, 1.0]], 0.0).is_err());
        let tube = TrajectoryTube::new(segment(3), 0.0).unwrap();
        assert!(covering_number(&tube, 0.0).is_err());
    }

    #[test]
    fn beta_alpha_examples() {
        let (beta, alpha) = beta_alpha(2, 0.5, 1e-12, 3.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(beta, 2.0 * 4f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(beta, 2.7726, epsilon = 1e-4);
        assert!(alpha < 1e-5);
        let (beta, _) = beta_alpha(10, 0.1, 0.1, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(beta, 9.2103, epsilon = 1e-4);
        let (_, alpha) = beta_alpha(10, 0.1, 0.7, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(alpha, 0.0);
        assert!(beta_alpha(10, 1.0, 0.1, 0.0, 0.0, 0.0).is_err());
        assert!(beta_alpha(10, 0.0, 0.1, 0.0, 0.0, 0.0).is_err());
        assert!(beta_alpha(0, 0.5, 0.1, 0.0, 0.0, 0.0).is_err());
        assert!(beta_alpha(2, 0.5, 0.1, -1.0, 0.0, 0.0).is_err());
    }

    fn single(y: f64) -> GpPosterior {
        fit(KernelParams::unit(1), Dataset::new(vec![vec![0.0]], vec![y], 1.0).unwrap()).unwrap()
    }

    #[test]
    fn lipschitz_bound_examples() {
        let (l_mu, _) = lipschitz_bounds(&single(0.0), 0.6, 1.0, 0.1).unwrap();
        assert_eq!(l_mu, 0.0);
        let (l_mu, l_var) = lipschitz_bounds(&single(2.0), 0.6, 1.0, 0.1).unwrap();
        assert_relative_eq!(l_mu, 0.6, epsilon = 1e-15);
        assert_relative_eq!(l_var, 2.0 * 0.1 * 0.6 * (1.0 + 0.5), epsilon = 1e-15);
        let (doubled, _) = lipschitz_bounds(&single(4.0), 0.6, 1.0, 0.1).unwrap();
        assert_relative_eq!(doubled, 2.0 * l_mu, epsilon = 1e-15);
        let empty = GpPosterior::prior(KernelParams::unit(1), 1.0).unwrap();
        assert!(matches!(lipschitz_bounds(&empty, 0.6, 1.0, 0.1), Err(Error::State(_))));
    }

    #[test]
    fn gap_examples() {
        let gp = single(2.0);
        assert_eq!(observer_gap(&gp, &[1.3], &[1.3], 1.0).unwrap(), 0.0);
        assert_relative_eq!(observer_gap(&gp, &[1.2], &[1.0], 1.0).unwrap(), 0.1, epsilon = 1e-12);
        assert!(observer_gap(&gp, &[1.2, 0.0], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn envelope_degenerate_cases() {
        let gp = single(2.0);
        let tube = TrajectoryTube::new(vec![vec![0.0]], 0.0).unwrap();
        let settings = BoundSettings {
            rho: 1e-12,
            confidence_param: 0.1,
        };
        let report = composite_bound(&gp, &tube, &settings, 0.0, GapTerm::Computed(0.0)).unwrap();
        let x = [0.4];
        let sigma = gp.variance(&x).unwrap().sqrt();
        assert_relative_eq!(
            report.envelope(&gp, &x).unwrap(),
            report.beta.sqrt() * sigma,
            epsilon = 1e-5
        );
        assert_relative_eq!(report.confidence, 0.9, epsilon = 1e-15);

        let deployment = composite_bound(&gp, &tube, &settings, 0.0, GapTerm::NotComputable).unwrap();
        assert!(matches!(deployment.envelope(&gp, &x), Err(Error::State(_))));
        assert!(deployment.ideal_envelope(&gp, &x).is_ok());

        let wrong_dim = TrajectoryTube::new(vec![vec![0.0, 0.0]], 0.0).unwrap();
        assert!(composite_bound(&gp, &wrong_dim, &settings, 0.0, GapTerm::NotComputable).is_err());
    }

    #[test]
    fn envelope_is_alpha_when_variance_and_gap_vanish() {
        // a noiseless regressor queried at its training point has zero variance
        let gp = fit(KernelParams::unit(1), Dataset::new(vec![vec![0.0]], vec![1.0], 0.0).unwrap()).unwrap();
        let tube = TrajectoryTube::new(vec![vec![0.0], vec![0.5]], 0.0).unwrap();
        let settings = BoundSettings {
            rho: 0.2,
            confidence_param: 0.1,
        };
        let report = composite_bound(&gp, &tube, &settings, 1.5, GapTerm::Computed(0.0)).unwrap();
        assert_relative_eq!(report.envelope(&gp, &[0.0]).unwrap(), report.alpha, epsilon = 1e-12);
    }

    #[test]
    fn sampled_lipschitz_of_linear_map() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, -2.0]];
        let l = sampled_lipschitz(|x| 3.0 * x[0] - 4.0 * x[1], &pts, 1e-4);
        assert_relative_eq!(l, 5.0, epsilon = 1e-9);
    }
}
