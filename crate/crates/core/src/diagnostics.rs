//! Numerical check of the perturbation chain behind window CCA.
//!
//! Ground truth is the exact rank-`r` SVD of a window `X = U S Vᵀ + …`. An
//! estimated basis `V̂ = V + Δ` propagates to `Û`, `Ŝ` (normalized columns of
//! `X V̂`), to `Ĉ = V̂_x Û_xᵀ Û_y V̂_yᵀ`, to the whitening factor
//! `V̂ Ŝ⁻¹ V̂ᵀ`, and finally to the directions. Each stage has an
//! `(actual, bound)` pair; [`ErrorReport::checks`] lists them all.
//!
//! Matrices of size `p×q` or `p×p` are never formed: differences of the form
//! `P̂ M̂ Q̂ᵀ − P M Qᵀ` are reduced to a small core through one QR of
//! `[P̂ P]` and `[Q̂ Q]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{aligned_error, dot, gram_schmidt, normalize_columns, orthonormalize, thin_svd, Mat};
use crate::static_cca::{cca_from_factors, Whitening};

/// Denominators below this make a bound infinite.
pub const DENOM_FLOOR: f64 = 1e-8;

/// Exact rank-`r` SVD factors of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SideTruth {
    pub v: Mat,
    pub u: Mat,
    pub s: Vec<f64>,
}

impl SideTruth {
    pub fn from_window(x: &Mat, r: usize) -> Result<Self> {
        let svd = thin_svd(x, r)?;
        if let Some(j) = svd.s.iter().position(|&s| s <= 0.0) {
            return Err(Error::Rank(format!("window has rank {j} < {r}")));
        }
        Ok(Self {
            v: svd.v,
            u: svd.u,
            s: svd.s,
        })
    }
}

/// Per-column actual errors and their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBounds {
    pub actual: Vec<f64>,
    pub bound: Vec<f64>,
}

/// Everything derived from one side's basis estimate.
struct SideState {
    delta: Mat,
    xdelta_cols: Vec<f64>,
    xdelta_f: f64,
    v_hat: Mat,
    u_hat: Mat,
    s_hat: Vec<f64>,
    v_true: Mat,
    u_true: Mat,
}

fn side_state(x: &Mat, v_true: &Mat, v_est: &Mat, s_true: &[f64]) -> Result<SideState> {
    let r = v_true.cols();
    if v_est.shape() != v_true.shape() || x.cols() != v_true.rows() || s_true.len() != r {
        return Err(Error::Input(format!(
            "inconsistent shapes: X {:?}, V {:?}, V̂ {:?}, {} singular values",
            x.shape(),
            v_true.shape(),
            v_est.shape(),
            s_true.len()
        )));
    }
    // estimated columns only carry meaning up to sign
    let mut v_hat = v_est.clone();
    for j in 0..r {
        if dot(&v_hat.col(j), &v_true.col(j)) < 0.0 {
            let flipped: Vec<f64> = v_hat.col(j).iter().map(|e| -e).collect();
            v_hat.set_col(j, &flipped);
        }
    }
    let delta = v_hat.sub(v_true);
    let xdelta = x.matmul(&delta);
    let xdelta_cols = normalize_columns(&xdelta).norms;
    let xdelta_f = xdelta.frobenius_norm();
    let est = normalize_columns(&x.matmul(&v_hat));
    let inv: Vec<f64> = s_true.iter().map(|s| 1.0 / s).collect();
    let u_true = x.matmul(v_true).scale_cols(&inv);
    Ok(SideState {
        delta,
        xdelta_cols,
        xdelta_f,
        v_hat,
        u_hat: est.q,
        s_hat: est.norms,
        v_true: v_true.clone(),
        u_true,
    })
}

fn gap(sigma: f64, xd: f64) -> f64 {
    (sigma - xd).abs()
}

fn over(num: f64, den: f64) -> f64 {
    if den < DENOM_FLOOR {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `|σ_i − σ̂_i|` against `min{‖(XΔ)_i‖, σ_i}`.
pub fn sigma_error_bound(x: &Mat, v_true: &Mat, v_est: &Mat, s_true: &[f64]) -> Result<ColumnBounds> {
    let st = side_state(x, v_true, v_est, s_true)?;
    Ok(sigma_bounds(&st, s_true))
}

fn sigma_bounds(st: &SideState, s: &[f64]) -> ColumnBounds {
    ColumnBounds {
        actual: s.iter().zip(&st.s_hat).map(|(a, b)| (a - b).abs()).collect(),
        bound: s.iter().zip(&st.xdelta_cols).map(|(&si, &d)| d.min(si)).collect(),
    }
}

/// `‖u_i − û_i‖` against `(‖(XΔ)_i‖ + min{‖(XΔ)_i‖, σ_i}) / |σ_i − ‖(XΔ)_i‖|`.
pub fn u_error_bound(x: &Mat, v_true: &Mat, v_est: &Mat, s_true: &[f64]) -> Result<ColumnBounds> {
    let st = side_state(x, v_true, v_est, s_true)?;
    Ok(u_bounds(&st, s_true))
}

fn u_bounds(st: &SideState, s: &[f64]) -> ColumnBounds {
    let actual = (0..s.len())
        .map(|j| {
            let d: Vec<f64> = st.u_true.col(j).iter().zip(st.u_hat.col(j)).map(|(a, b)| a - b).collect();
            dot(&d, &d).sqrt()
        })
        .collect();
    let bound = s
        .iter()
        .zip(&st.xdelta_cols)
        .map(|(&si, &d)| over(d + d.min(si), gap(si, d)))
        .collect();
    ColumnBounds { actual, bound }
}

/// `|1/σ_i − 1/σ̂_i|` against `min{‖(XΔ)_i‖, σ_i} / (σ_i |σ_i − ‖(XΔ)_i‖|)`.
pub fn inv_sigma_error_bound(x: &Mat, v_true: &Mat, v_est: &Mat, s_true: &[f64]) -> Result<ColumnBounds> {
    let st = side_state(x, v_true, v_est, s_true)?;
    Ok(inv_sigma_bounds(&st, s_true))
}

fn inv_sigma_bounds(st: &SideState, s: &[f64]) -> ColumnBounds {
    ColumnBounds {
        actual: s.iter().zip(&st.s_hat).map(|(a, b)| (1.0 / a - 1.0 / b).abs()).collect(),
        bound: s
            .iter()
            .zip(&st.xdelta_cols)
            .map(|(&si, &d)| over(d.min(si), si * gap(si, d)))
            .collect(),
    }
}

/// One side's aggregate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SideReport {
    pub delta_f: f64,
    pub xdelta_f: f64,
    pub sigma: ColumnBounds,
    pub u: ColumnBounds,
    pub inv_sigma: ColumnBounds,
    /// `min_i |σ_i − ‖(XΔ)_i‖|`.
    pub min_gap: f64,
    pub c_sigma: f64,
    pub delta_s_f: f64,
    pub delta_s_bound: f64,
    pub delta_u_f: f64,
    pub delta_u_bound: f64,
    /// `sqrt(Σ_i u_bound_i²)`, a column-wise alternative to `delta_u_bound`.
    pub delta_u_percol_bound: f64,
    pub delta_sinv_f: f64,
    pub delta_sinv_bound: f64,
    /// `‖V̂ Ŝ⁻¹ V̂ᵀ − V S⁻¹ Vᵀ‖_F`.
    pub delta_whiten_f: f64,
    pub delta_whiten_bound: f64,
    pub eta_sigma: f64,
    /// `2‖XΔ‖_F(1 + ‖Δ‖_F)/min_gap + ‖Δ‖_F`.
    pub eta_c_side: f64,
}

fn side_report(st: &SideState, s: &[f64], c_sigma: f64) -> Result<SideReport> {
    let r = s.len() as f64;
    let sigma = sigma_bounds(st, s);
    let u = u_bounds(st, s);
    let inv_sigma = inv_sigma_bounds(st, s);
    let min_gap = s
        .iter()
        .zip(&st.xdelta_cols)
        .map(|(&si, &d)| gap(si, d))
        .fold(f64::INFINITY, f64::min);
    let delta_f = st.delta.frobenius_norm();
    let xd = st.xdelta_f;
    let capped = xd.min(r * s[0]);
    let l2 = |v: &[f64]| dot(v, v).sqrt();
    let delta_sinv_bound = over(capped, c_sigma * min_gap);
    let s_inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    let s_inv_f = l2(&s_inv);
    let s_hat_inv: Vec<f64> = st.s_hat.iter().map(|v| 1.0 / v).collect();
    let delta_whiten_f = factored_difference(
        &st.v_hat,
        &Mat::diag(&s_hat_inv),
        &st.v_hat,
        &st.v_true,
        &Mat::diag(&s_inv),
        &st.v_true,
    )?
    .0;
    let delta_whiten_bound = 2.0 * s_inv_f * delta_f
        + 2.0 * delta_sinv_bound * delta_f
        + delta_sinv_bound
        + s_inv_f * delta_f * delta_f
        + delta_sinv_bound * delta_f * delta_f;
    Ok(SideReport {
        delta_f,
        xdelta_f: xd,
        min_gap,
        c_sigma,
        delta_s_f: l2(&sigma.actual),
        delta_s_bound: capped,
        delta_u_f: l2(&u.actual),
        delta_u_bound: over(xd + capped, min_gap),
        delta_u_percol_bound: l2(&u.bound),
        delta_sinv_f: l2(&inv_sigma.actual),
        delta_sinv_bound,
        delta_whiten_f,
        delta_whiten_bound: if delta_sinv_bound.is_finite() {
            delta_whiten_bound
        } else {
            f64::INFINITY
        },
        eta_sigma: [xd, xd * delta_f, delta_f, xd * delta_f * delta_f, delta_f * delta_f]
            .into_iter()
            .fold(0.0, f64::max),
        eta_c_side: over(2.0 * xd * (1.0 + delta_f), min_gap) + delta_f,
        sigma,
        u,
        inv_sigma,
    })
}

/// `(‖D‖_F, ‖D‖₂)` for `D = P̂ M̂ Q̂ᵀ − P M Qᵀ` without forming `D`.
fn factored_difference(p_hat: &Mat, m_hat: &Mat, q_hat: &Mat, p: &Mat, m: &Mat, q: &Mat) -> Result<(f64, f64)> {
    let left = stack_cols(p_hat, p);
    let right = stack_cols(q_hat, q);
    let lq = gram_schmidt(left.columns(), 0.0, true)?;
    let rq = gram_schmidt(right.columns(), 0.0, true)?;
    let rl = Mat::from_columns(left.cols(), &lq.r);
    let rr = Mat::from_columns(right.cols(), &rq.r);
    let (a, b) = (m_hat.rows(), m_hat.cols());
    let (c, d) = (m.rows(), m.cols());
    let mut k = Mat::zeros(a + c, b + d);
    for i in 0..a {
        for j in 0..b {
            k.data_mut()[i * (b + d) + j] = m_hat[(i, j)];
        }
    }
    for i in 0..c {
        for j in 0..d {
            k.data_mut()[(a + i) * (b + d) + b + j] = -m[(i, j)];
        }
    }
    let core = rl.matmul(&k).matmul(&rr.transpose());
    let fro = core.frobenius_norm();
    let spec = if fro == 0.0 { 0.0 } else { thin_svd(&core, 1)?.s[0] };
    Ok((fro, spec))
}

fn stack_cols(a: &Mat, b: &Mat) -> Mat {
    let mut cols = a.columns();
    cols.extend(b.columns());
    Mat::from_columns(a.rows(), &cols)
}

/// Knobs for [`aggregate_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundOptions {
    /// Number of canonical pairs compared; defaults to `min(r_x, r_y)`.
    pub r_c: Option<usize>,
    /// Smallest canonical correlation the bounds assume.
    pub c_rho: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { r_c: None, c_rho: 1e-3 }
    }
}

/// Full set of actual errors, bounds and η quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub x: SideReport,
    pub y: SideReport,
    pub r_c: usize,
    pub sigma_c: Vec<f64>,
    pub sigma_c_hat: Vec<f64>,
    pub delta_c_f: f64,
    pub delta_c_2: f64,
    pub eta_c_xy: f64,
    pub delta_c_bound: f64,
    pub eta_c: f64,
    pub eta_wh: f64,
    pub eta_final: f64,
    pub delta_w_f: f64,
    pub delta_h_f: f64,
    pub svd_perturb_bound_w: f64,
    pub svd_perturb_bound_h: f64,
    /// Procrustes-aligned `‖F̂ O_W − F‖_F`.
    pub f_err: f64,
    pub g_err: f64,
    /// `‖L̂ − L‖₂` over the first `r_c` canonical correlations.
    pub corr_err: f64,
    /// `σ_{C,r_c} < c_ρ`.
    pub assumption_violated: bool,
    /// Some denominator fell below [`DENOM_FLOOR`].
    pub infinite_bounds: bool,
}

/// One `actual ≤ bound` statement.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub actual: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.bound.is_infinite() || self.actual <= self.bound + slack
    }
}

impl ErrorReport {
    pub fn checks(&self) -> Vec<BoundCheck> {
        let mut out = Vec::new();
        let mut push = |name: String, actual: f64, bound: f64| out.push(BoundCheck { name, actual, bound });
        for (tag, s) in [("x", &self.x), ("y", &self.y)] {
            for (what, cb) in [("sigma_err", &s.sigma), ("u_err", &s.u), ("inv_sigma_err", &s.inv_sigma)] {
                for (i, (a, b)) in cb.actual.iter().zip(&cb.bound).enumerate() {
                    push(format!("{what}_{tag}_{}", i + 1), *a, *b);
                }
            }
            push(format!("delta_S{tag}_F"), s.delta_s_f, s.delta_s_bound);
            push(format!("delta_U{tag}_F"), s.delta_u_f, s.delta_u_bound);
            push(format!("delta_U{tag}_F_percol"), s.delta_u_f, s.delta_u_percol_bound);
            push(format!("delta_S{tag}Inv_F"), s.delta_sinv_f, s.delta_sinv_bound);
            push(format!("delta_Sigma{tag}InvHalf_F"), s.delta_whiten_f, s.delta_whiten_bound);
        }
        push("delta_C_F".into(), self.delta_c_f, self.delta_c_bound);
        push("delta_C_2".into(), self.delta_c_2, self.delta_c_f);
        push("delta_W_F".into(), self.delta_w_f, self.svd_perturb_bound_w);
        push("delta_H_F".into(), self.delta_h_f, self.svd_perturb_bound_h);
        out
    }

    /// Checks that fail with the given slack.
    pub fn violations(&self, slack: f64) -> Vec<BoundCheck> {
        self.checks().into_iter().filter(|c| !c.holds(slack)).collect()
    }

    /// Flat `(key, value)` listing of every field, in a fixed order.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let mut kv: Vec<(String, f64)> = Vec::new();
        for (tag, s) in [("x", &self.x), ("y", &self.y)] {
            kv.push((format!("delta_{tag}_F"), s.delta_f));
            kv.push((format!("{tag}delta_F"), s.xdelta_f));
            kv.push((format!("min_gap_{tag}"), s.min_gap));
            kv.push((format!("c_sigma_{tag}"), s.c_sigma));
            kv.push((format!("eta_Sigma_{tag}"), s.eta_sigma));
        }
        kv.push(("r_C".into(), self.r_c as f64));
        for (i, (a, b)) in self.sigma_c.iter().zip(&self.sigma_c_hat).enumerate() {
            kv.push((format!("sigma_C_{}", i + 1), *a));
            kv.push((format!("sigma_C_hat_{}", i + 1), *b));
        }
        for c in self.checks() {
            kv.push((c.name.clone(), c.actual));
            kv.push((format!("{}_bound", c.name), c.bound));
        }
        kv.extend([
            ("eta_C_xy".into(), self.eta_c_xy),
            ("eta_C".into(), self.eta_c),
            ("eta_WH".into(), self.eta_wh),
            ("eta_final".into(), self.eta_final),
            ("F_err".into(), self.f_err),
            ("G_err".into(), self.g_err),
            ("corr_err".into(), self.corr_err),
            ("assumption_violated".into(), flag(self.assumption_violated)),
            ("infinite_bounds".into(), flag(self.infinite_bounds)),
        ]);
        kv
    }
}

/// Evaluates the whole chain for basis estimates `vx_hat`, `vy_hat` on the
/// window `(x, y)` whose exact factors are `tx`, `ty`.
pub fn aggregate_bounds(
    x: &Mat,
    y: &Mat,
    tx: &SideTruth,
    ty: &SideTruth,
    vx_hat: &Mat,
    vy_hat: &Mat,
    opts: &BoundOptions,
) -> Result<ErrorReport> {
    if x.rows() != y.rows() {
        return Err(Error::Input(format!("windows have {} and {} rows", x.rows(), y.rows())));
    }
    let sx = side_state(x, &tx.v, vx_hat, &tx.s)?;
    let sy = side_state(y, &ty.v, vy_hat, &ty.s)?;
    let (rx, ry) = (tx.s.len(), ty.s.len());
    let r_c = opts.r_c.unwrap_or(rx.min(ry));
    if r_c == 0 || r_c > rx.min(ry) {
        return Err(Error::Config(format!("r_C = {r_c} outside 1..={}", rx.min(ry))));
    }
    let cs = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let x_rep = side_report(&sx, &tx.s, cs(&tx.s))?;
    let y_rep = side_report(&sy, &ty.s, cs(&ty.s))?;

    let m = tx.u.t_matmul(&ty.u);
    let m_hat = sx.u_hat.t_matmul(&sy.u_hat);
    let (delta_c_f, delta_c_2) = factored_difference(&sx.v_hat, &m_hat, &sy.v_hat, &tx.v, &m, &ty.v)?;
    let eta_c_xy = x_rep.eta_c_side.max(y_rep.eta_c_side);
    let delta_c_bound = 2.0 * eta_c_xy + eta_c_xy * eta_c_xy;
    let (dx, dy) = (x_rep.delta_f, y_rep.delta_f);
    let (xdx, ydy) = (x_rep.xdelta_f, y_rep.xdelta_f);
    let eta_c = [xdx, ydy, dx, dy, xdx * dx, ydy * dy].into_iter().fold(0.0, f64::max);
    let eta_wh = eta_c.max(eta_c.powi(2)).max(eta_c.powi(3));
    let eta_final = [
        eta_wh,
        x_rep.eta_sigma,
        y_rep.eta_sigma,
        eta_wh * x_rep.eta_sigma,
        eta_wh * y_rep.eta_sigma,
    ]
    .into_iter()
    .fold(0.0, f64::max);

    // singular subspaces of C and Ĉ
    let k = rx.min(ry);
    let core = thin_svd(&m, k)?;
    let w = tx.v.matmul(&core.u).leading_cols(r_c);
    let h = ty.v.matmul(&core.v).leading_cols(r_c);
    let qx = orthonormalize(&sx.v_hat)?;
    let qy = orthonormalize(&sy.v_hat)?;
    let mid = qx.t_matmul(&sx.v_hat).matmul(&m_hat).matmul(&sy.v_hat.t_matmul(&qy));
    let core_hat = thin_svd(&mid, k)?;
    let w_hat = qx.matmul(&core_hat.u).leading_cols(r_c);
    let h_hat = qy.matmul(&core_hat.v).leading_cols(r_c);
    let sigma_c = core.s.clone();
    let sigma_c_hat = core_hat.s.clone();
    let next = sigma_c.get(r_c).copied().unwrap_or(0.0);
    let denom = sigma_c[r_c - 1].powi(2) - next.powi(2);
    let yu = over(2f64.powf(1.5) * (2.0 * sigma_c[0] + delta_c_2) * delta_c_f, denom);

    let truth = cca_from_factors(&tx.v, &tx.u, &tx.s, &ty.v, &ty.u, &ty.s, r_c, Whitening::Inverse)?;
    let est = cca_from_factors(
        &sx.v_hat,
        &sx.u_hat,
        &sx.s_hat,
        &sy.v_hat,
        &sy.u_hat,
        &sy.s_hat,
        r_c,
        Whitening::Inverse,
    )?;
    let corr_err = truth
        .d
        .iter()
        .zip(&est.d)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();

    let report = ErrorReport {
        r_c,
        delta_c_f,
        delta_c_2,
        eta_c_xy,
        delta_c_bound: if eta_c_xy.is_finite() { delta_c_bound } else { f64::INFINITY },
        eta_c,
        eta_wh,
        eta_final,
        delta_w_f: aligned_error(&w_hat, &w)?,
        delta_h_f: aligned_error(&h_hat, &h)?,
        svd_perturb_bound_w: yu,
        svd_perturb_bound_h: yu,
        f_err: aligned_error(&est.f, &truth.f)?,
        g_err: aligned_error(&est.g, &truth.g)?,
        corr_err,
        assumption_violated: sigma_c[r_c - 1] < opts.c_rho,
        infinite_bounds: false,
        sigma_c,
        sigma_c_hat,
        x: x_rep,
        y: y_rep,
    };
    let infinite_bounds = report.checks().iter().any(|c| c.bound.is_infinite());
    Ok(ErrorReport {
        infinite_bounds,
        ..report
    })
}

/// `orthonormalize(V + ε E)` with `E` Gaussian, scaled to unit Frobenius norm.
pub fn perturb_basis(v: &Mat, eps: f64, rng: &mut impl Rng) -> Result<Mat> {
    let e = Mat::from_fn(v.rows(), v.cols(), |_, _| rng.sample(StandardNormal));
    perturb_along(v, &e, eps)
}

fn perturb_along(v: &Mat, e: &Mat, eps: f64) -> Result<Mat> {
    let n = e.frobenius_norm();
    orthonormalize(&v.add(&e.scale(eps / n)))
}

/// Reports along a fixed perturbation direction, one per `ε`.
pub fn perturbation_sweep(
    x: &Mat,
    y: &Mat,
    tx: &SideTruth,
    ty: &SideTruth,
    eps: &[f64],
    seed: u64,
    opts: &BoundOptions,
) -> Result<Vec<(f64, ErrorReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = Mat::from_fn(tx.v.rows(), tx.v.cols(), |_, _| rng.sample(StandardNormal));
    let ey = Mat::from_fn(ty.v.rows(), ty.v.cols(), |_, _| rng.sample(StandardNormal));
    eps.iter()
        .map(|&e| {
            let vx = perturb_along(&tx.v, &ex, e)?;
            let vy = perturb_along(&ty.v, &ey, e)?;
            Ok((e, aggregate_bounds(x, y, tx, ty, &vx, &vy, opts)?))
        })
        .collect()
}
