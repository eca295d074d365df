use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, Mat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    /// Isotropic Gaussian noise with this standard deviation per coordinate.
    Gaussian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drift {
    None,
    /// Bases rotate from `V_start` to an orthogonal `V_end` over the path.
    ContinuousOrthogonal,
}

/// Two-view low-rank latent model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub p: usize,
    pub q: usize,
    /// Data-matrix singular values per side; their counts are the ranks.
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
    /// Correlations of the leading latent pairs.
    pub rho: Vec<f64>,
    pub n: usize,
    pub noise: Noise,
    pub drift: Drift,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            p: 100,
            q: 50,
            sigma_x: vec![2.0, 1.0],
            sigma_y: vec![3.0, 2.0, 1.0],
            rho: vec![0.8, 0.5],
            n: 1000,
            noise: Noise::None,
            drift: Drift::None,
        }
    }
}

impl ModelConfig {
    pub fn r_x(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn r_y(&self) -> usize {
        self.sigma_y.len()
    }

    pub fn r_c(&self) -> usize {
        self.rho.len()
    }

    /// Noise level `0.1/√n`.
    pub fn default_noise(n: usize) -> Noise {
        Noise::Gaussian(0.1 / (n as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let (rx, ry) = (self.r_x(), self.r_y());
        let mult = if self.drift == Drift::None { 1 } else { 2 };
        if rx == 0 || ry == 0 || mult * rx > self.p || mult * ry > self.q {
            return Err(Error::Config(format!(
                "ranks ({rx}, {ry}) do not fit dimensions ({}, {}){}",
                self.p,
                self.q,
                if mult == 2 { " with orthogonal drift endpoints" } else { "" }
            )));
        }
        if self.r_c() > rx.min(ry) {
            return Err(Error::Config(format!(
                "{} correlated pairs exceed min(r_x, r_y) = {}",
                self.r_c(),
                rx.min(ry)
            )));
        }
        if let Some(r) = self.rho.iter().find(|r| !(r.abs() <= 1.0)) {
            return Err(Error::Config(format!("correlation {r} outside [-1, 1]")));
        }
        if let Some(s) = self.sigma_x.iter().chain(&self.sigma_y).find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("singular value {s} must be positive")));
        }
        if self.n == 0 {
            return Err(Error::Config("path length n must be positive".into()));
        }
        if let Noise::Gaussian(s) = self.noise {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("noise level {s} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Fixed random bases drawn for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTruth {
    pub config: ModelConfig,
    pub vx_start: Mat,
    pub vy_start: Mat,
    /// Present under drift; orthogonal to the matching start basis.
    pub vx_end: Option<Mat>,
    pub vy_end: Option<Mat>,
}

fn endpoints(dim: usize, r: usize, drift: bool, rng: &mut impl Rng) -> Result<(Mat, Option<Mat>)> {
    let cols = if drift { 2 * r } else { r };
    let q = orthonormalize(&Mat::from_fn(dim, cols, |_, _| rng.sample(StandardNormal)))?;
    let start = q.leading_cols(r);
    let end = drift.then(|| q.select_cols(&(r..2 * r).collect::<Vec<_>>()));
    Ok((start, end))
}

impl ModelTruth {
    pub fn draw(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let drift = config.drift == Drift::ContinuousOrthogonal;
        let (vx_start, vx_end) = endpoints(config.p, config.r_x(), drift, rng)?;
        let (vy_start, vy_end) = endpoints(config.q, config.r_y(), drift, rng)?;
        Ok(Self {
            config: config.clone(),
            vx_start,
            vy_start,
            vx_end,
            vy_end,
        })
    }

    /// Position along the path for sample `t ∈ [1, n]`.
    pub fn tau(&self, t: usize) -> f64 {
        let n = self.config.n;
        if n <= 1 {
            0.0
        } else {
            (t.saturating_sub(1)) as f64 / (n - 1) as f64
        }
    }

    pub fn basis_x(&self, t: usize) -> Mat {
        match &self.vx_end {
            None => self.vx_start.clone(),
            Some(end) => interpolate(&self.vx_start, end, self.tau(t)),
        }
    }

    pub fn basis_y(&self, t: usize) -> Mat {
        match &self.vy_end {
            None => self.vy_start.clone(),
            Some(end) => interpolate(&self.vy_start, end, self.tau(t)),
        }
    }
}

/// `V_start cos(πτ/2) + V_end sin(πτ/2)`; needs `V_startᵀV_end = 0`.
pub fn drift_basis(v_start: &Mat, v_end: &Mat, tau: f64) -> Result<Mat> {
    if v_start.shape() != v_end.shape() {
        return Err(Error::Config(format!(
            "drift endpoints have shapes {:?} and {:?}",
            v_start.shape(),
            v_end.shape()
        )));
    }
    let cross = v_start.t_matmul(v_end).max_abs();
    if cross > 1e-10 {
        return Err(Error::Config(format!(
            "drift endpoints are not orthogonal (max |V_startᵀV_end| = {cross:.3e})"
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("drift position {tau} outside [0, 1]")));
    }
    Ok(interpolate(v_start, v_end, tau))
}

fn interpolate(a: &Mat, b: &Mat, tau: f64) -> Mat {
    let ang = FRAC_PI_2 * tau;
    a.scale(ang.cos()).add(&b.scale(ang.sin()))
}

/// One `(x, y)` sample at path position `t`.
pub fn gen_pair(truth: &ModelTruth, t: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let cfg = &truth.config;
    let scale = 1.0 / (cfg.n as f64).sqrt();
    let (rx, ry) = (cfg.r_x(), cfg.r_y());
    let mut lx = vec![0.0; rx];
    let mut ly = vec![0.0; ry];
    for (k, &rho) in cfg.rho.iter().enumerate() {
        let zeta: f64 = rng.sample(StandardNormal);
        let xi: f64 = rng.sample(StandardNormal);
        lx[k] = zeta;
        ly[k] = rho * zeta + (1.0 - rho * rho).sqrt() * xi;
    }
    for v in lx.iter_mut().skip(cfg.r_c()) {
        *v = rng.sample(StandardNormal);
    }
    for v in ly.iter_mut().skip(cfg.r_c()) {
        *v = rng.sample(StandardNormal);
    }
    let cx: Vec<f64> = lx.iter().zip(&cfg.sigma_x).map(|(l, s)| l * s * scale).collect();
    let cy: Vec<f64> = ly.iter().zip(&cfg.sigma_y).map(|(l, s)| l * s * scale).collect();
    let mut x = truth.basis_x(t).mul_vec(&cx);
    let mut y = truth.basis_y(t).mul_vec(&cy);
    if let Noise::Gaussian(s) = cfg.noise {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v += s * rng.sample::<f64, _>(StandardNormal);
        }
    }
    (x, y)
}

/// Population canonical directions at `t`: `f_k = v_{x,k}(t)`, `g_k = v_{y,k}(t)`.
///
/// The latent cross-correlation matrix is diagonal, so after whitening each
/// side the canonical pairs are the matching basis columns.
pub fn true_directions(truth: &ModelTruth, t: usize) -> (Mat, Mat) {
    let k = truth.config.r_c();
    (truth.basis_x(t).leading_cols(k), truth.basis_y(t).leading_cols(k))
}
