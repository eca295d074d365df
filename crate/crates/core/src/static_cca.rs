//! Batch canonical correlation analysis.
//!
//! All three fits start from thin SVDs `X = U_x S_x V_xᵀ`, `Y = U_y S_y V_yᵀ`.
//! [`fit_cca`] keeps every singular triplet, [`fit_icca`] keeps the leading
//! `r_x`/`r_y` and forms the `p×q` matrix `C = V_x U_xᵀ U_y V_yᵀ` explicitly,
//! while [`fit_icca_scalable`] only ever factors the small `r_x×r_y` matrix
//! `U_xᵀU_y` and never allocates anything of size `p×q`.
//!
//! Directions are `f_k ∝ V_x S_x⁻¹ V_xᵀ w_k`, i.e. the data-matrix singular
//! values enter with exponent −1 (the covariance eigenvalues are `S_x²/n`, so
//! this is `Σ_x^{-1/2}` up to a global constant). Every direction is returned
//! with unit norm and the correlations are reported separately.

use crate::error::{Error, Result};
use crate::linalg::{canonicalize_columns, normalize_columns, thin_svd, thin_svd_centered, Mat, ThinSvd};

/// Smallest retained singular value relative to the largest before a fit is
/// declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FullCca,
    Icca,
    ScalableIcca,
    Swicca,
    GenOja,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FullCca => "full",
            Method::Icca => "icca",
            Method::ScalableIcca => "scalable",
            Method::Swicca => "swicca",
            Method::GenOja => "genoja",
        }
    }
}

/// Per-update bookkeeping attached to streaming estimates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimateMeta {
    /// Update index that produced the estimate (0 for batch fits).
    pub t: u64,
    pub window_len: usize,
    /// Window not yet full.
    pub provisional: bool,
    /// Some diagonal entry of `D` exceeded 1 and was clipped.
    pub clipped: bool,
    /// Loading columns dropped because their norm was zero.
    pub dropped_x: usize,
    pub dropped_y: usize,
}

/// Canonical directions and correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaEstimate {
    /// `p×k`, unit columns.
    pub f: Mat,
    /// `q×k`, unit columns.
    pub g: Mat,
    /// Non-increasing, in `[0, 1]` up to rounding.
    pub corrs: Vec<f64>,
    pub method: Method,
    pub meta: EstimateMeta,
}

impl CcaEstimate {
    pub fn k(&self) -> usize {
        self.corrs.len()
    }
}

/// Exponent applied to the data-matrix singular values when mapping the
/// core singular vectors back to directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Whitening {
    /// `S⁻¹`: exact canonical directions (`Σ^{-1/2}` up to a global factor).
    #[default]
    Inverse,
    /// `S^{-1/2}`: milder reweighting; same population directions when the
    /// latent cross-correlation is diagonal, but a different estimator.
    InverseSqrt,
}

impl Whitening {
    pub fn exponent(self) -> f64 {
        match self {
            Whitening::Inverse => -1.0,
            Whitening::InverseSqrt => -0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Whitening::Inverse => "inverse",
            Whitening::InverseSqrt => "inverse-sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Subtract column means before factoring.
    pub center: bool,
    /// Number of direction pairs to return; `None` means `min(r_x, r_y)`.
    pub components: Option<usize>,
    pub whitening: Whitening,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            center: true,
            components: None,
            whitening: Whitening::Inverse,
        }
    }
}

/// Result of the small-core factorization shared by the scalable fit and the
/// streaming estimator.
#[derive(Debug, Clone)]
pub(crate) struct CoreFit {
    pub f: Mat,
    pub g: Mat,
    /// Singular values of `U_xᵀU_y`.
    pub d: Vec<f64>,
    /// Left/right singular vectors of `U_xᵀU_y`.
    pub a: Mat,
    pub b: Mat,
}

/// SVD of `U_xᵀU_y = A D Bᵀ`, then `f_k ∝ V_x S_x^e a_k`, `g_k ∝ V_y S_y^e b_k`
/// with `e` from `whitening`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cca_from_factors(
    vx: &Mat,
    ux: &Mat,
    sx: &[f64],
    vy: &Mat,
    uy: &Mat,
    sy: &[f64],
    k: usize,
    whitening: Whitening,
) -> Result<CoreFit> {
    let core = ux.t_matmul(uy);
    let svd = thin_svd(&core, k)?;
    let f = directions(vx, sx, &svd.u, whitening);
    let g = directions(vy, sy, &svd.v, whitening);
    Ok(CoreFit {
        f,
        g,
        d: svd.s,
        a: svd.u,
        b: svd.v,
    })
}

/// Unit-normalized, sign-canonical columns of `V·S^e·coef`.
pub(crate) fn directions(v: &Mat, s: &[f64], coef: &Mat, whitening: Whitening) -> Mat {
    let inv: Vec<f64> = match whitening {
        Whitening::Inverse => s.iter().map(|x| 1.0 / x).collect(),
        Whitening::InverseSqrt => s.iter().map(|x| 1.0 / x.sqrt()).collect(),
    };
    let scaled = Mat::from_fn(coef.rows(), coef.cols(), |i, j| coef[(i, j)] * inv[i]);
    let mut out = normalize_columns(&v.matmul(&scaled)).q;
    canonicalize_columns(&mut out);
    out
}

fn check_pair(x: &Mat, y: &Mat) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::Input(format!(
            "X has {} rows but Y has {}; samples must be paired",
            x.rows(),
            y.rows()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::Input("need at least two paired samples".into()));
    }
    x.ensure_finite("X")?;
    y.ensure_finite("Y")
}

fn side_svd(m: &Mat, r: usize, center: bool, side: &str) -> Result<ThinSvd> {
    let (n, p) = m.shape();
    if r == 0 || r > n.min(p) {
        return Err(Error::Config(format!(
            "rank {r} for {side} must satisfy 1 <= r <= min(n, dim) = {}",
            n.min(p)
        )));
    }
    let svd = if center {
        thin_svd_centered(m, r)?
    } else {
        thin_svd(m, r)?
    };
    let largest = svd.s[0];
    let smallest = svd.s[r - 1];
    if !(smallest > RANK_TOL * largest) {
        return Err(Error::Rank(format!(
            "{side} is rank deficient at rank {r} (singular value ratio {:.3e}); use ICCA with a smaller rank",
            if largest > 0.0 { smallest / largest } else { 0.0 }
        )));
    }
    Ok(svd)
}

fn component_count(r_x: usize, r_y: usize, opts: &FitOptions) -> Result<usize> {
    let max = r_x.min(r_y);
    match opts.components {
        None => Ok(max),
        Some(k) if k >= 1 && k <= max => Ok(k),
        Some(k) => Err(Error::Config(format!(
            "requested {k} components, at most {max} are available"
        ))),
    }
}

/// Classical CCA on all `p` and `q` dimensions.
pub fn fit_cca(x: &Mat, y: &Mat, opts: &FitOptions) -> Result<CcaEstimate> {
    check_pair(x, y)?;
    let n = x.rows();
    let (p, q) = (x.cols(), y.cols());
    if n <= p.max(q) {
        return Err(Error::Rank(format!(
            "full CCA needs more samples than dimensions (n = {n}, p = {p}, q = {q}); use ICCA"
        )));
    }
    let mut est = fit_icca(x, y, p, q, opts)?;
    est.method = Method::FullCca;
    Ok(est)
}

/// Informative CCA: CCA on the rank-`r_x`/`r_y` truncations, forming `C`.
pub fn fit_icca(x: &Mat, y: &Mat, r_x: usize, r_y: usize, opts: &FitOptions) -> Result<CcaEstimate> {
    check_pair(x, y)?;
    let k = component_count(r_x, r_y, opts)?;
    let sx = side_svd(x, r_x, opts.center, "X")?;
    let sy = side_svd(y, r_y, opts.center, "Y")?;
    // C = V_x (U_xᵀ U_y) V_yᵀ, p×q
    let c = sx.v.matmul(&sx.u.t_matmul(&sy.u)).matmul(&sy.v.transpose());
    let csvd = thin_svd(&c, k)?;
    // Σ^{-1/2} w = V S⁻¹ Vᵀ w
    let f = directions(&sx.v, &sx.s, &sx.v.t_matmul(&csvd.u), opts.whitening);
    let g = directions(&sy.v, &sy.s, &sy.v.t_matmul(&csvd.v), opts.whitening);
    Ok(CcaEstimate {
        f,
        g,
        corrs: csvd.s,
        method: Method::Icca,
        meta: EstimateMeta::default(),
    })
}

/// Informative CCA through the `r_x×r_y` core `U_xᵀU_y`; memory stays
/// `O(n(r_x + r_y) + p r_x + q r_y)` beyond the inputs.
pub fn fit_icca_scalable(
    x: &Mat,
    y: &Mat,
    r_x: usize,
    r_y: usize,
    opts: &FitOptions,
) -> Result<CcaEstimate> {
    check_pair(x, y)?;
    let k = component_count(r_x, r_y, opts)?;
    let sx = side_svd(x, r_x, opts.center, "X")?;
    let sy = side_svd(y, r_y, opts.center, "Y")?;
    let core = cca_from_factors(&sx.v, &sx.u, &sx.s, &sy.v, &sy.u, &sy.s, k, opts.whitening)?;
    Ok(CcaEstimate {
        f: core.f,
        g: core.g,
        corrs: core.d,
        method: Method::ScalableIcca,
        meta: EstimateMeta::default(),
    })
}
