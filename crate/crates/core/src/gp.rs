//! Zero-mean Gaussian-process regression with a squared-exponential kernel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Posterior variances below this magnitude are round-off and clamp to zero.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Hyperparameters of the squared-exponential kernel
/// `k(x, x') = amplitude * exp(-(x - x')^T diag(2 l_i^2)^-1 (x - x'))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub amplitude: f64,
    pub length_scales: Vec<f64>,
}

impl KernelParams {
    pub fn new(amplitude: f64, length_scales: Vec<f64>) -> Result<Self> {
        let params = Self {
            amplitude,
            length_scales,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit amplitude and unit length scale in every one of `dim` coordinates.
    pub fn unit(dim: usize) -> Self {
        Self {
            amplitude: 1.0,
            length_scales: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Argument(format!(
                "kernel amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.length_scales.is_empty() {
            return Err(Error::Argument("kernel needs at least one length scale".into()));
        }
        if let Some(l) = self
            .length_scales
            .iter()
            .find(|l| !(**l > 0.0 && l.is_finite()))
        {
            return Err(Error::Argument(format!(
                "kernel length scales must be positive, got {l}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Largest kernel value, attained at zero distance.
    pub fn max_value(&self) -> f64 {
        self.amplitude
    }

    /// Global Lipschitz constant of `x -> k(x, x')`.
    ///
    /// Along any unit direction the kernel profile is `a * exp(-s^2 / (2 l^2))`
    /// with `l` no smaller than the shortest length scale, whose steepest slope
    /// is `a / (l * sqrt(e))`.
    pub fn lipschitz_constant(&self) -> f64 {
        let l_min = self
            .length_scales
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        self.amplitude / (l_min * std::f64::consts::E.sqrt())
    }

    /// Scaled squared distance `(x - x')^T Lambda^-1 (x - x')`.
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.length_scales)
            .map(|((a, b), l)| {
                let d = a - b;
                d * d / (2.0 * l * l)
            })
            .sum()
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.amplitude * (-self.scaled_sq_dist(x, y)).exp()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim("kernel first argument", self.dim(), x.len())?;
        check_dim("kernel second argument", self.dim(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }
}

/// Free-function form of [`KernelParams::eval`].
pub fn kernel_eval(params: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    params.eval(x, y)
}

/// Training inputs, targets and the assumed output-noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub noise_variance: f64,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let data = Self {
            inputs,
            targets,
            noise_variance,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn empty(noise_variance: f64) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            noise_variance,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::Argument(format!(
                "dataset has {} inputs but {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Argument(format!(
                "noise variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        if let Some(first) = self.inputs.first() {
            for x in &self.inputs {
                check_dim("dataset input", first.len(), x.len())?;
            }
        }
        Ok(())
    }
}

/// In-place lower Cholesky factor of a symmetric matrix.
///
/// Reports the first pivot that is not strictly positive.
fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// A fitted regressor. Immutable after [`fit`]; all queries take `&self`.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: KernelParams,
    data: Dataset,
    /// `K + noise * I`.
    gram: DMatrix<f64>,
    gram_factor: DMatrix<f64>,
    /// `(K + noise * I)^-1 y`.
    weights: DVector<f64>,
}

/// Conditions the zero-mean prior on `data`.
pub fn fit(kernel: KernelParams, data: Dataset) -> Result<GpPosterior> {
    kernel.validate()?;
    data.validate()?;
    if let Some(x) = data.inputs.first() {
        check_dim("dataset input", kernel.dim(), x.len())?;
    }
    let n = data.len();
    let mut gram = DMatrix::from_fn(n, n, |i, j| {
        kernel.eval_unchecked(&data.inputs[i], &data.inputs[j])
    });
    for i in 0..n {
        gram[(i, i)] += data.noise_variance;
    }
    let gram_factor = cholesky_lower(&gram)?;
    let y = DVector::from_column_slice(&data.targets);
    let z = gram_factor
        .solve_lower_triangular(&y)
        .expect("factor has a positive diagonal");
    let weights = gram_factor
        .tr_solve_lower_triangular(&z)
        .expect("factor has a positive diagonal");
    Ok(GpPosterior {
        kernel,
        data,
        gram,
        gram_factor,
        weights,
    })
}

impl GpPosterior {
    /// The prior: no conditioning data.
    pub fn prior(kernel: KernelParams, noise_variance: f64) -> Result<Self> {
        fit(kernel, Dataset::empty(noise_variance))
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    /// `K + noise * I` as assembled at fit time.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn kernel_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.data
                .inputs
                .iter()
                .map(|xi| self.kernel.eval_unchecked(x, xi)),
        )
    }

    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        check_dim("query point", self.kernel.dim(), x.len())?;
        Ok(self
            .data
            .inputs
            .iter()
            .zip(self.weights.iter())
            .map(|(xi, w)| w * self.kernel.eval_unchecked(x, xi))
            .sum())
    }

    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        check_dim("query point", self.kernel.dim(), x.len())?;
        let prior = self.kernel.eval_unchecked(x, x);
        if self.is_empty() {
            return Ok(prior);
        }
        let v = self
            .gram_factor
            .solve_lower_triangular(&self.kernel_vector(x))
            .expect("factor has a positive diagonal");
        let var = prior - v.norm_squared();
        Ok(if var < VARIANCE_CLAMP { var.max(0.0) } else { var })
    }

    /// Analytic gradient of the posterior mean with respect to the query point.
    pub fn mean_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("query point", self.kernel.dim(), x.len())?;
        let mut grad = vec![0.0; x.len()];
        for (xi, w) in self.data.inputs.iter().zip(self.weights.iter()) {
            let k = self.kernel.eval_unchecked(x, xi);
            for (d, g) in grad.iter_mut().enumerate() {
                let l = self.kernel.length_scales[d];
                *g -= w * k * (x[d] - xi[d]) / (l * l);
            }
        }
        Ok(grad)
    }

    /// Spectral norm of `(K + noise * I)^-1`, i.e. the reciprocal of the
    /// smallest eigenvalue of the (symmetric positive definite) Gram matrix.
    pub fn gram_inverse_norm(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::State(
                "gram inverse norm is undefined for an empty regressor".into(),
            ));
        }
        let eig = SymmetricEigen::new(self.gram.clone());
        let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(1.0 / lambda_min)
    }
}

pub fn posterior_mean(gp: &GpPosterior, x: &[f64]) -> Result<f64> {
    gp.mean(x)
}

pub fn posterior_variance(gp: &GpPosterior, x: &[f64]) -> Result<f64> {
    gp.variance(x)
}

pub fn posterior_mean_gradient(gp: &GpPosterior, x: &[f64]) -> Result<Vec<f64>> {
    gp.mean_gradient(x)
}

pub fn gram_inverse_norm(gp: &GpPosterior) -> Result<f64> {
    gp.gram_inverse_norm()
}
