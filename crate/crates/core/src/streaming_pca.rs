//! Streaming principal-subspace trackers.
//!
//! Two full-observation backends are provided: GROUSE (a rank-one Grassmannian
//! rotation per sample) and an incremental thin SVD that appends each sample
//! as a new row of an implicit factorization and truncates back to rank `r`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{gram_schmidt, norm, thin_svd, Mat};

/// Relative size below which a residual or projection is treated as zero.
const ZERO_GUARD: f64 = 1e-12;
/// Per-rank tolerance on `‖BᵀB − I‖_F` before the basis is re-orthonormalized.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Grouse,
    Isvd,
}

/// Rotation-angle rule for GROUSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `θ = η·‖r‖·‖p‖`.
    Constant(f64),
    /// `θ = scale·atan(‖r‖/‖p‖)`; scale 1 absorbs the sample completely.
    Greedy(f64),
}

impl StepRule {
    /// `Constant(0.2/√p)`.
    pub fn default_constant(p: usize) -> Self {
        StepRule::Constant(0.2 / (p as f64).sqrt())
    }
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Greedy(1.0)
    }
}

/// How the running mean absorbs a new sample.
#[derive(Debug, Clone, Copy)]
pub enum MeanUpdate<'a> {
    /// `mean ← (1−λ)·mean + λ·x`, or `x` on the first sample.
    Ewma(f64),
    /// Arithmetic mean of the given window of raw samples.
    Window(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaUpdateReport {
    pub residual_norm: f64,
    pub projection_norm: f64,
    pub rotated: bool,
}

/// State of one streaming PCA estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    basis: Mat,
    svals: Option<Vec<f64>>,
    mean: Option<Vec<f64>>,
    count: u64,
    backend: Backend,
    step: StepRule,
}

impl SubspaceState {
    /// Random orthonormal `p×r` start drawn from `seed`.
    ///
    /// The incremental-SVD backend starts with all singular values at zero, so
    /// the random basis only acts as a placeholder until data arrive.
    pub fn new(p: usize, r: usize, backend: Backend, step: StepRule, seed: u64) -> Result<Self> {
        if r == 0 || r > p {
            return Err(Error::Config(format!("rank {r} must satisfy 1 <= r <= p = {p}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Mat::from_fn(p, r, |_, _| StandardNormal.sample(&mut rng));
        let qr = gram_schmidt(raw.columns(), 0.0, true)?;
        let basis = Mat::from_columns(p, &qr.q);
        Self::with_basis(basis, backend, step)
    }

    /// Starts from a caller-supplied orthonormal basis.
    pub fn with_basis(basis: Mat, backend: Backend, step: StepRule) -> Result<Self> {
        let (p, r) = basis.shape();
        if r == 0 || r > p {
            return Err(Error::Config(format!("basis shape {p}x{r} is not a valid p x r frame")));
        }
        basis.ensure_finite("initial basis")?;
        let dev = basis.gram_deviation();
        if dev > ORTHO_TOL * r as f64 {
            return Err(Error::Input(format!(
                "initial basis is not orthonormal (Gram deviation {dev:.3e})"
            )));
        }
        let (StepRule::Constant(eta) | StepRule::Greedy(eta)) = step;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("step constant {eta} must be positive")));
        }
        Ok(Self {
            basis,
            svals: (backend == Backend::Isvd).then(|| vec![0.0; r]),
            mean: None,
            count: 0,
            backend,
            step,
        })
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn svals(&self) -> Option<&[f64]> {
        self.svals.as_deref()
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn step(&self) -> StepRule {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Bytes held by the basis, singular values and mean.
    pub fn state_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        f * (self.basis.rows() * self.basis.cols()
            + self.svals.as_ref().map_or(0, Vec::len)
            + self.mean.as_ref().map_or(0, Vec::len))
    }

    /// Runs the configured backend on one (already centered) sample.
    pub fn update(&mut self, x: &[f64]) -> Result<PcaUpdateReport> {
        match self.backend {
            Backend::Grouse => self.grouse_update(x),
            Backend::Isvd => self.isvd_update(x),
        }
    }

    /// `basis·(basisᵀx)` split into weights, projection and residual.
    fn project(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "sample has length {}, tracker dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        ensure_finite("sample", x)?;
        let wgt = self.basis.t_mul_vec(x);
        let proj = self.basis.mul_vec(&wgt);
        let res: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
        Ok((wgt, proj, res))
    }

    pub fn grouse_update(&mut self, x: &[f64]) -> Result<PcaUpdateReport> {
        if self.backend != Backend::Grouse {
            return Err(Error::Config("grouse_update on a non-GROUSE tracker".into()));
        }
        let (wgt, proj, res) = self.project(x)?;
        self.count += 1;
        let xn = norm(x);
        let rn = norm(&res);
        let pn = norm(&proj);
        let wn = norm(&wgt);
        let mut report = PcaUpdateReport {
            residual_norm: rn,
            projection_norm: pn,
            rotated: false,
        };
        if xn == 0.0 || rn < ZERO_GUARD * xn || wn < ZERO_GUARD * xn {
            return Ok(report);
        }
        let theta = match self.step {
            StepRule::Constant(eta) => eta * rn * pn,
            StepRule::Greedy(scale) => scale * (rn / pn).atan(),
        };
        let (sin, cos) = theta.sin_cos();
        let dir: Vec<f64> = proj
            .iter()
            .zip(&res)
            .map(|(p, r)| (cos - 1.0) * p / pn + sin * r / rn)
            .collect();
        let r = self.rank();
        for (i, d) in dir.iter().enumerate() {
            let row = self.basis.row_mut(i);
            for c in 0..r {
                row[c] += d * wgt[c] / wn;
            }
        }
        report.rotated = true;
        self.repair_orthonormality();
        Ok(report)
    }

    pub fn isvd_update(&mut self, x: &[f64]) -> Result<PcaUpdateReport> {
        if self.backend != Backend::Isvd {
            return Err(Error::Config("isvd_update on a non-ISVD tracker".into()));
        }
        let (wgt, proj, res) = self.project(x)?;
        self.count += 1;
        let xn = norm(x);
        let rn = norm(&res);
        let report = PcaUpdateReport {
            residual_norm: rn,
            projection_norm: norm(&proj),
            rotated: xn > 0.0,
        };
        if xn == 0.0 {
            return Ok(report);
        }
        let r = self.rank();
        let p = self.dim();
        let svals = self.svals.as_ref().expect("isvd tracker keeps singular values");
        let augment = rn > ZERO_GUARD * xn;
        let width = if augment { r + 1 } else { r };
        // rows: previous singular directions, then the new sample
        let mut bordered = Mat::zeros(r + 1, width);
        for i in 0..r {
            bordered[(i, i)] = svals[i];
        }
        for c in 0..r {
            bordered[(r, c)] = wgt[c];
        }
        if augment {
            bordered[(r, r)] = rn;
        }
        let svd = thin_svd(&bordered, r)?;
        let mut basis = Mat::zeros(p, r);
        for i in 0..p {
            let old = self.basis.row(i);
            let extra = if augment { res[i] / rn } else { 0.0 };
            let out = basis.row_mut(i);
            for c in 0..r {
                let mut acc = 0.0;
                for a in 0..r {
                    acc += old[a] * svd.v[(a, c)];
                }
                if augment {
                    acc += extra * svd.v[(r, c)];
                }
                out[c] = acc;
            }
        }
        self.basis = basis;
        self.svals = Some(svd.s);
        self.repair_orthonormality();
        Ok(report)
    }

    /// Updates the running mean with `x` and returns `x − mean`.
    pub fn mean_update(&mut self, x: &[f64], mode: MeanUpdate<'_>) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "sample has length {}, tracker dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let mean = match mode {
            MeanUpdate::Ewma(lambda) => match self.mean.take() {
                None => x.to_vec(),
                Some(prev) => prev
                    .iter()
                    .zip(x)
                    .map(|(m, v)| (1.0 - lambda) * m + lambda * v)
                    .collect(),
            },
            MeanUpdate::Window(window) => window_mean(window, x.len())?,
        };
        let centered = x.iter().zip(&mean).map(|(v, m)| v - m).collect();
        self.mean = Some(mean);
        Ok(centered)
    }

    fn repair_orthonormality(&mut self) {
        let r = self.rank();
        if self.basis.gram_deviation() > ORTHO_TOL * r as f64 {
            let qr = gram_schmidt(self.basis.columns(), 0.0, true)
                .expect("deficient columns are completed, not rejected");
            self.basis = Mat::from_columns(self.dim(), &qr.q);
        }
    }
}

pub(crate) fn window_mean(window: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; dim];
    if window.is_empty() {
        return Ok(mean);
    }
    for w in window {
        if w.len() != dim {
            return Err(Error::Input(format!(
                "window entry has length {}, expected {dim}",
                w.len()
            )));
        }
        for (m, v) in mean.iter_mut().zip(w) {
            *m += v;
        }
    }
    let inv = 1.0 / window.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(mean)
}
