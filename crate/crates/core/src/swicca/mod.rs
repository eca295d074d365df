//! Sliding-window informative CCA.
//!
//! Each update advances two streaming PCA trackers, pushes the new pair into
//! a bounded window and re-solves a small CCA problem on the window's
//! loadings: the columns of `X_w V̂_x` are normalized to give `Û_x` (their
//! norms give `Ŝ_x`), `Û_xᵀÛ_y = A D Bᵀ` is factored, and the directions are
//! `f_k ∝ V̂_x Ŝ_x⁻¹ a_k`, `g_k ∝ V̂_y Ŝ_y⁻¹ b_k`.
//!
//! In [`WindowMode::Loadings`] the window stores `x_tᵀV̂_x` instead of `x_t`;
//! each stored row keeps the basis that was current when it arrived.

mod window;

pub use window::SlidingWindow;

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{dot, normalize_columns, Mat};
use crate::static_cca::{cca_from_factors, CcaEstimate, EstimateMeta, Method, Whitening};
use crate::streaming_pca::{window_mean, Backend, MeanUpdate, StepRule, SubspaceState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideConfig {
    pub backend: Backend,
    pub step: StepRule,
}

impl Default for SideConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Grouse,
            step: StepRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    Samples,
    Loadings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrMode {
    /// Diagonal of `D`, clipped to `[0, 1]`.
    DiagonalD,
    /// Pearson correlation of the window projected on each direction pair.
    EmpiricalWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMode {
    Ewma(f64),
    /// Mean of the raw samples currently in the window. Needs the samples window.
    WindowMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwiccaConfig {
    pub p: usize,
    pub q: usize,
    pub r_x: usize,
    pub r_y: usize,
    pub window: usize,
    pub x_pca: SideConfig,
    pub y_pca: SideConfig,
    pub window_mode: WindowMode,
    pub corr_mode: CorrMode,
    pub mean_mode: Option<MeanMode>,
    pub whitening: Whitening,
    pub seed: u64,
}

impl SwiccaConfig {
    /// GROUSE with the greedy step on both sides, samples window, `D`
    /// correlations and `Ŝ^{-1/2}` direction weights.
    pub fn new(p: usize, q: usize, r_x: usize, r_y: usize, window: usize) -> Self {
        Self {
            p,
            q,
            r_x,
            r_y,
            window,
            x_pca: SideConfig::default(),
            y_pca: SideConfig::default(),
            window_mode: WindowMode::Samples,
            corr_mode: CorrMode::DiagonalD,
            mean_mode: None,
            whitening: Whitening::InverseSqrt,
            seed: 0,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.x_pca.backend = backend;
        self.y_pca.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_x < 1 || self.r_x > self.p {
            return Err(Error::Config(format!(
                "Require 1 <= r_x <= p violated (r_x = {}, p = {})",
                self.r_x, self.p
            )));
        }
        if self.r_y < 1 || self.r_y > self.q {
            return Err(Error::Config(format!(
                "Require 1 <= r_y <= q violated (r_y = {}, q = {})",
                self.r_y, self.q
            )));
        }
        if self.window < self.r_x.max(self.r_y) {
            return Err(Error::Config(format!(
                "Require max(r_x, r_y) <= w violated (w = {}, r_x = {}, r_y = {})",
                self.window, self.r_x, self.r_y
            )));
        }
        match self.mean_mode {
            Some(MeanMode::Ewma(l)) if !(l > 0.0 && l <= 1.0) => {
                return Err(Error::Config(format!("EWMA weight {l} must lie in (0, 1]")));
            }
            Some(MeanMode::WindowMean) if self.window_mode == WindowMode::Loadings => {
                return Err(Error::Config(
                    "window-mean centering needs the raw samples window, not the loadings window".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    fn warmup(&self) -> usize {
        self.r_x.max(self.r_y)
    }
}

/// Streaming CCA state: two trackers, the window and the latest estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SwiccaState {
    config: SwiccaConfig,
    pca_x: SubspaceState,
    pca_y: SubspaceState,
    pinned: bool,
    window: SlidingWindow,
    last: Option<CcaEstimate>,
    t: u64,
}

impl SwiccaState {
    pub fn new(config: SwiccaConfig) -> Result<Self> {
        config.validate()?;
        let pca_x = SubspaceState::new(config.p, config.r_x, config.x_pca.backend, config.x_pca.step, config.seed)?;
        let pca_y = SubspaceState::new(
            config.q,
            config.r_y,
            config.y_pca.backend,
            config.y_pca.step,
            config.seed ^ 0x9E37_79B9_7F4A_7C15,
        )?;
        Ok(Self {
            window: SlidingWindow::new(config.window),
            config,
            pca_x,
            pca_y,
            pinned: false,
            last: None,
            t: 0,
        })
    }

    /// A state whose PCA bases are fixed to `vx`, `vy` and never updated.
    pub fn with_fixed_bases(config: SwiccaConfig, vx: Mat, vy: Mat) -> Result<Self> {
        config.validate()?;
        if vx.shape() != (config.p, config.r_x) || vy.shape() != (config.q, config.r_y) {
            return Err(Error::Config(format!(
                "fixed bases have shapes {:?} and {:?}, expected ({}, {}) and ({}, {})",
                vx.shape(),
                vy.shape(),
                config.p,
                config.r_x,
                config.q,
                config.r_y
            )));
        }
        let pca_x = SubspaceState::with_basis(vx, config.x_pca.backend, config.x_pca.step)?;
        let pca_y = SubspaceState::with_basis(vy, config.y_pca.backend, config.y_pca.step)?;
        Ok(Self {
            window: SlidingWindow::new(config.window),
            config,
            pca_x,
            pca_y,
            pinned: true,
            last: None,
            t: 0,
        })
    }

    pub fn config(&self) -> &SwiccaConfig {
        &self.config
    }

    pub fn pca_x(&self) -> &SubspaceState {
        &self.pca_x
    }

    pub fn pca_y(&self) -> &SubspaceState {
        &self.pca_y
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn updates(&self) -> u64 {
        self.t
    }

    /// Latest estimate, or `None` before the window holds `max(r_x, r_y)` pairs.
    pub fn current(&self) -> Option<&CcaEstimate> {
        self.last.as_ref()
    }

    /// Bytes retained between updates: trackers, window and last estimate.
    pub fn state_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let est = self.last.as_ref().map_or(0, |e| {
            f * (e.f.rows() * e.f.cols() + e.g.rows() * e.g.cols() + e.corrs.len())
        });
        self.pca_x.state_bytes() + self.pca_y.state_bytes() + self.window.bytes() + est
    }

    /// Ingests one pair. Returns the new estimate once warmed up.
    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<Option<&CcaEstimate>> {
        if x.len() != self.config.p || y.len() != self.config.q {
            return Err(Error::Input(format!(
                "sample pair has lengths ({}, {}), expected ({}, {})",
                x.len(),
                y.len(),
                self.config.p,
                self.config.q
            )));
        }
        ensure_finite("x sample", x)?;
        ensure_finite("y sample", y)?;
        self.t += 1;

        let (xc, yc) = match self.config.mean_mode {
            None => (x.to_vec(), y.to_vec()),
            Some(MeanMode::Ewma(lambda)) => (
                self.pca_x.mean_update(x, MeanUpdate::Ewma(lambda))?,
                self.pca_y.mean_update(y, MeanUpdate::Ewma(lambda))?,
            ),
            Some(MeanMode::WindowMean) => {
                self.window.push(x.to_vec(), y.to_vec());
                let xc = self.pca_x.mean_update(x, MeanUpdate::Window(self.window.xs()))?;
                let yc = self.pca_y.mean_update(y, MeanUpdate::Window(self.window.ys()))?;
                (xc, yc)
            }
        };

        if !self.pinned {
            self.pca_x.update(&xc)?;
            self.pca_y.update(&yc)?;
        }

        match (self.config.mean_mode, self.config.window_mode) {
            (Some(MeanMode::WindowMean), _) => {}
            (_, WindowMode::Samples) => {
                self.window.push(xc, yc);
            }
            (_, WindowMode::Loadings) => {
                let lx = self.pca_x.basis().t_mul_vec(&xc);
                let ly = self.pca_y.basis().t_mul_vec(&yc);
                self.window.push(lx, ly);
            }
        }

        if self.window.len() < self.config.warmup() {
            return Ok(None);
        }
        let est = self.solve_window()?;
        self.last = Some(est);
        Ok(self.last.as_ref())
    }

    fn window_loadings(&mut self) -> Result<(Mat, Mat)> {
        match self.config.window_mode {
            WindowMode::Loadings => Ok((Mat::from_rows(self.window.xs())?, Mat::from_rows(self.window.ys())?)),
            WindowMode::Samples => {
                let center = self.config.mean_mode == Some(MeanMode::WindowMean);
                let lx = project_rows(self.window.xs(), self.pca_x.basis(), center)?;
                let ly = project_rows(self.window.ys(), self.pca_y.basis(), center)?;
                Ok((lx, ly))
            }
        }
    }

    fn solve_window(&mut self) -> Result<CcaEstimate> {
        let (lx, ly) = self.window_loadings()?;
        let nx = normalize_columns(&lx);
        let ny = normalize_columns(&ly);
        let act_x = nx.active();
        let act_y = ny.active();
        let k = act_x.len().min(act_y.len());
        let mut meta = EstimateMeta {
            t: self.t,
            window_len: self.window.len(),
            provisional: !self.window.is_full(),
            clipped: false,
            dropped_x: self.config.r_x - act_x.len(),
            dropped_y: self.config.r_y - act_y.len(),
        };
        if k == 0 {
            return Ok(CcaEstimate {
                f: Mat::zeros(self.config.p, 0),
                g: Mat::zeros(self.config.q, 0),
                corrs: Vec::new(),
                method: Method::Swicca,
                meta,
            });
        }
        let vx = self.pca_x.basis().select_cols(&act_x);
        let vy = self.pca_y.basis().select_cols(&act_y);
        let ux = nx.q.select_cols(&act_x);
        let uy = ny.q.select_cols(&act_y);
        let sx: Vec<f64> = act_x.iter().map(|&j| nx.norms[j]).collect();
        let sy: Vec<f64> = act_y.iter().map(|&j| ny.norms[j]).collect();
        let core = cca_from_factors(&vx, &ux, &sx, &vy, &uy, &sy, k, self.config.whitening)?;

        let corrs = match self.config.corr_mode {
            CorrMode::DiagonalD => {
                meta.clipped = core.d.iter().any(|&d| d > 1.0);
                core.d.iter().map(|d| d.clamp(0.0, 1.0)).collect()
            }
            CorrMode::EmpiricalWindow => {
                // X_w f_k ∝ L_x Ŝ_x⁻¹ a_k because f_k lies in span(V̂_x)
                let lx_act = lx.select_cols(&act_x);
                let ly_act = ly.select_cols(&act_y);
                (0..k)
                    .map(|c| {
                        let ca: Vec<f64> = (0..sx.len()).map(|i| core.a[(i, c)] / sx[i]).collect();
                        let cb: Vec<f64> = (0..sy.len()).map(|i| core.b[(i, c)] / sy[i]).collect();
                        pearson(&lx_act.mul_vec(&ca), &ly_act.mul_vec(&cb)).abs().min(1.0)
                    })
                    .collect()
            }
        };
        Ok(CcaEstimate {
            f: core.f,
            g: core.g,
            corrs,
            method: Method::Swicca,
            meta,
        })
    }
}

fn project_rows(rows: &[Vec<f64>], basis: &Mat, center: bool) -> Result<Mat> {
    let r = basis.cols();
    let mean = if center {
        Some(window_mean(rows, basis.rows())?)
    } else {
        None
    };
    let mut out = Mat::zeros(rows.len(), r);
    let mut buf = vec![0.0; basis.rows()];
    for (i, row) in rows.iter().enumerate() {
        let src: &[f64] = match &mean {
            Some(m) => {
                for ((b, v), mu) in buf.iter_mut().zip(row).zip(m) {
                    *b = v - mu;
                }
                &buf
            }
            None => row,
        };
        out.row_mut(i).copy_from_slice(&basis.t_mul_vec(src));
    }
    Ok(out)
}

/// Sample Pearson correlation; 0 when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let da: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let db: Vec<f64> = b.iter().map(|v| v - mb).collect();
    let saa = dot(&da, &da);
    let sbb = dot(&db, &db);
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    dot(&da, &db) / (saa * sbb).sqrt()
}
