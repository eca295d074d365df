//! Gen-Oja baseline: a two-timescale stochastic iteration for the top
//! generalized eigenvector of `A v = μ B v`, where
//! `A = [[0, Σ_xy], [Σ_yx, 0]]` and `B = diag(Σ_xx + λI, Σ_yy + λI)`.
//!
//! The inner iterate `w` runs SGD on the linear system `B w = A v`; the outer
//! iterate `v` takes an Oja step along `w`. Steps are
//! `α_t = c_α / ln(t + 2)` and `β_t = c_β / (t + 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{axpy, dot, norm};

/// How the per-sample operators are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Operator {
    /// Materializes `xxᵀ`, `yyᵀ` and `xyᵀ` each step, as the reference
    /// algorithm does: `O(p² + q² + pq)` per update.
    #[default]
    Dense,
    /// Applies the same rank-one operators through inner products: `O(p + q)`.
    Factored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOjaConfig {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub ridge: f64,
    pub operator: Operator,
}

impl Default for GenOjaConfig {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            c_beta: 1.0,
            ridge: 0.0,
            operator: Operator::Dense,
        }
    }
}

/// One direction pair; `ready` is false while either block of `v` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GenOjaEstimate {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub ready: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOjaState {
    p: usize,
    q: usize,
    w: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    config: GenOjaConfig,
    dense: Option<DenseBuffers>,
}

#[derive(Debug, Clone, PartialEq)]
struct DenseBuffers {
    bx: Vec<f64>,
    by: Vec<f64>,
    axy: Vec<f64>,
    scratch: Vec<f64>,
}

impl GenOjaState {
    pub fn new(p: usize, q: usize, config: GenOjaConfig, seed: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Config(format!("Gen-Oja needs p, q >= 1 (got p = {p}, q = {q})")));
        }
        for (name, c) in [("c_alpha", config.c_alpha), ("c_beta", config.c_beta)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("{name} = {c} must be positive")));
            }
        }
        if !(config.ridge.is_finite() && config.ridge >= 0.0) {
            return Err(Error::Config(format!("ridge = {} must be non-negative", config.ridge)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..p + q).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        v.iter_mut().for_each(|e| *e /= n);
        let dense = (config.operator == Operator::Dense).then(|| DenseBuffers {
            bx: vec![0.0; p * p],
            by: vec![0.0; q * q],
            axy: vec![0.0; p * q],
            scratch: vec![0.0; p + q],
        });
        Ok(Self {
            p,
            q,
            w: v.clone(),
            v,
            t: 1,
            config,
            dense,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn config(&self) -> &GenOjaConfig {
        &self.config
    }

    /// Bytes of all retained buffers.
    pub fn state_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let dense = self
            .dense
            .as_ref()
            .map_or(0, |d| d.bx.len() + d.by.len() + d.axy.len() + d.scratch.len());
        f * (self.w.len() + self.v.len() + dense)
    }

    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<GenOjaEstimate> {
        if x.len() != self.p || y.len() != self.q {
            return Err(Error::Input(format!(
                "sample pair has lengths ({}, {}), expected ({}, {})",
                x.len(),
                y.len(),
                self.p,
                self.q
            )));
        }
        ensure_finite("x sample", x)?;
        ensure_finite("y sample", y)?;
        let t = self.t as f64;
        let alpha = self.config.c_alpha / (t + 2.0).ln();
        let beta = self.config.c_beta / (t + 1.0);
        // residual = B_t w − A_t v
        let residual = match self.dense.as_mut() {
            Some(buf) => dense_residual(buf, x, y, &self.w, &self.v, self.config.ridge),
            None => factored_residual(x, y, &self.w, &self.v, self.config.ridge),
        };
        axpy(-alpha, &residual, &mut self.w);
        let mut next = self.v.clone();
        axpy(beta, &self.w, &mut next);
        let n = norm(&next);
        if n.is_finite() && n > 0.0 {
            next.iter_mut().for_each(|e| *e /= n);
            self.v = next;
        }
        self.t += 1;
        Ok(self.estimate())
    }

    /// Unit-normalized blocks of `v`.
    pub fn estimate(&self) -> GenOjaEstimate {
        let (vx, vy) = self.v.split_at(self.p);
        let (f, fx) = unit_or_zero(vx);
        let (g, gy) = unit_or_zero(vy);
        GenOjaEstimate { f, g, ready: fx && gy }
    }
}

fn unit_or_zero(v: &[f64]) -> (Vec<f64>, bool) {
    let n = norm(v);
    if n > 0.0 && n.is_finite() {
        (v.iter().map(|e| e / n).collect(), true)
    } else {
        (vec![0.0; v.len()], false)
    }
}

fn factored_residual(x: &[f64], y: &[f64], w: &[f64], v: &[f64], ridge: f64) -> Vec<f64> {
    let p = x.len();
    let (wx, wy) = w.split_at(p);
    let (vx, vy) = v.split_at(p);
    let cx = dot(x, wx) - dot(y, vy);
    let cy = dot(y, wy) - dot(x, vx);
    let mut out = Vec::with_capacity(w.len());
    out.extend(x.iter().zip(wx).map(|(xi, wi)| xi * cx + ridge * wi));
    out.extend(y.iter().zip(wy).map(|(yi, wi)| yi * cy + ridge * wi));
    out
}

fn dense_residual(buf: &mut DenseBuffers, x: &[f64], y: &[f64], w: &[f64], v: &[f64], ridge: f64) -> Vec<f64> {
    let (p, q) = (x.len(), y.len());
    for (i, &xi) in x.iter().enumerate() {
        for (b, &xj) in buf.bx[i * p..(i + 1) * p].iter_mut().zip(x) {
            *b = xi * xj;
        }
        for (a, &yj) in buf.axy[i * q..(i + 1) * q].iter_mut().zip(y) {
            *a = xi * yj;
        }
    }
    for (i, &yi) in y.iter().enumerate() {
        for (b, &yj) in buf.by[i * q..(i + 1) * q].iter_mut().zip(y) {
            *b = yi * yj;
        }
    }
    let (wx, wy) = w.split_at(p);
    let (vx, vy) = v.split_at(p);
    let out = &mut buf.scratch;
    for i in 0..p {
        out[i] = dot(&buf.bx[i * p..(i + 1) * p], wx) + ridge * wx[i] - dot(&buf.axy[i * q..(i + 1) * q], vy);
    }
    for j in 0..q {
        out[p + j] = dot(&buf.by[j * q..(j + 1) * q], wy) + ridge * wy[j];
    }
    // (xyᵀ)ᵀ v_x, accumulated row by row
    for i in 0..p {
        let c = vx[i];
        for (o, a) in out[p..].iter_mut().zip(&buf.axy[i * q..(i + 1) * q]) {
            *o -= a * c;
        }
    }
    out.clone()
}
