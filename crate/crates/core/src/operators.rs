//! Forward operators `P` and latent data `d = P x + ε`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::samplers::RngStream;

/// A linear observation operator from `R^p` to `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForwardOperator {
    Identity { p: usize },
    /// Selects `indices` (strictly increasing) out of `0..p`.
    Mask { p: usize, indices: Vec<usize> },
    Dense { matrix: Matrix },
}

impl ForwardOperator {
    pub fn identity(p: usize) -> Self {
        Self::Identity { p }
    }

    pub fn mask(p: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("mask indices must be unique".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(Error::IndexOutOfRange { index: last, len: p });
            }
        }
        Ok(Self::Mask { p, indices })
    }

    pub fn dense(matrix: Matrix) -> Self {
        Self::Dense { matrix }
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        match self {
            Self::Identity { p } | Self::Mask { p, .. } => *p,
            Self::Dense { matrix } => matrix.cols(),
        }
    }

    /// Output dimension.
    pub fn output_dim(&self) -> usize {
        match self {
            Self::Identity { p } => *p,
            Self::Mask { indices, .. } => indices.len(),
            Self::Dense { matrix } => matrix.rows(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vector> {
        check_len("operator apply", self.input_dim(), x.len())?;
        Ok(self.apply_unchecked(x).into())
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vector> {
        check_len("operator adjoint", self.output_dim(), y.len())?;
        Ok(self.apply_adjoint_unchecked(y).into())
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => x.to_vec(),
            Self::Mask { indices, .. } => indices.iter().map(|&i| x[i]).collect(),
            Self::Dense { matrix } => matrix.matvec_unchecked(x),
        }
    }

    pub(crate) fn apply_adjoint_unchecked(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => y.to_vec(),
            Self::Mask { p, indices } => {
                let mut out = vec![0.0; *p];
                for (&i, &v) in indices.iter().zip(y) {
                    out[i] = v;
                }
                out
            }
            Self::Dense { matrix } => matrix.matvec_t_unchecked(y),
        }
    }

    /// `PᵀP z`, computed without forming the product.
    pub(crate) fn gram_apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity { .. } => z.to_vec(),
            Self::Mask { p, indices } => {
                let mut out = vec![0.0; *p];
                for &i in indices {
                    out[i] = z[i];
                }
                out
            }
            Self::Dense { matrix } => matrix.matvec_t_unchecked(&matrix.matvec_unchecked(z)),
        }
    }
}

/// Uniform random selection of `⌈fraction·p⌉` coordinates without replacement
/// (partial Fisher–Yates).
pub fn sample_mask(p: usize, fraction: f64, rng: &mut RngStream) -> Result<ForwardOperator> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mask fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let m = mask_size(p, fraction);
    if m == 0 {
        return Err(Error::InvalidArgument("mask would select no coordinates".into()));
    }
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = i + rng.below(p - i);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool.sort_unstable();
    Ok(ForwardOperator::Mask { p, indices: pool })
}

/// Number of selected coordinates for a given fraction.
pub fn mask_size(p: usize, fraction: f64) -> usize {
    // Guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
    let raw = fraction * p as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Noisy indirect observation of one datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDatum {
    pub d: Vector,
    pub operator: ForwardOperator,
    pub sigma: f64,
}

impl LatentDatum {
    pub fn new(d: Vector, operator: ForwardOperator, sigma: f64) -> Result<Self> {
        check_len("latent datum", operator.output_dim(), d.len())?;
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { d, operator, sigma })
    }
}

/// `d = P x + σ z` with `z` standard normal drawn from `rng`.
pub fn make_latent(
    x: &[f64],
    operator: ForwardOperator,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<LatentDatum> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let mut d = operator.apply(x)?;
    for v in d.iter_mut() {
        *v += sigma * rng.normal();
    }
    Ok(LatentDatum { d, operator, sigma })
}
