//! Thin singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! The input is first oriented so that it is tall; a tall matrix with more
//! rows than columns is reduced to its square triangular factor by
//! Gram–Schmidt with re-orthogonalization, and the Jacobi sweeps then run on
//! that square factor. Every step is sequential with a fixed loop order, so
//! identical input bits give identical output bits.

use super::mat::{axpy, dot, norm, Mat};
use super::ops::{canonical_sign, completion_vector, gram_schmidt};
use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 60;

/// Columns with norm below this fraction of `‖M‖_F` count as numerically zero.
const ZERO_COLUMN_TOL: f64 = 1e-14;

/// Wide inputs with at least this many entries are factored through their
/// `rows×rows` Gram matrix rather than a transposed copy.
const GRAM_PATH_ENTRIES: usize = 1 << 22;

/// `M ≈ U·diag(S)·Vᵀ` truncated to `k` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    /// `m×k`, orthonormal columns.
    pub u: Mat,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `n×k`, orthonormal columns.
    pub v: Mat,
}

impl ThinSvd {
    /// `U·diag(S)·Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        self.u.scale_cols(&self.s).matmul(&self.v.transpose())
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Leading `k` singular triplets of `m`.
///
/// The sign of each pair `(u_j, v_j)` is fixed so that the entry of `u_j` with
/// the largest magnitude (lowest index on ties) is non-negative.
pub fn thin_svd(m: &Mat, k: usize) -> Result<ThinSvd> {
    svd_columns(m, k, false)
}

/// Same as [`thin_svd`] on the column-centered matrix, without building the
/// centered copy as a separate `Mat`.
pub(crate) fn thin_svd_centered(m: &Mat, k: usize) -> Result<ThinSvd> {
    svd_columns(m, k, true)
}

fn svd_columns(m: &Mat, k: usize, center: bool) -> Result<ThinSvd> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Input(format!("cannot factor an empty {rows}x{cols} matrix")));
    }
    if k == 0 || k > rows.min(cols) {
        return Err(Error::Input(format!(
            "requested {k} singular triplets from a {rows}x{cols} matrix"
        )));
    }
    m.ensure_finite("matrix passed to thin_svd")?;

    let transposed = rows < cols;
    let means = if center { m.col_means() } else { vec![0.0; cols] };
    if transposed && rows * cols >= GRAM_PATH_ENTRIES {
        if let Some(svd) = wide_via_gram(m, k, &means)? {
            return Ok(svd);
        }
    }

    // Columns of the tall working matrix A (A = M or A = Mᵀ).
    let work: Vec<Vec<f64>> = if transposed {
        (0..rows)
            .map(|i| m.row(i).iter().zip(&means).map(|(v, mu)| v - mu).collect())
            .collect()
    } else {
        (0..cols)
            .map(|j| (0..rows).map(|i| m[(i, j)] - means[j]).collect())
            .collect()
    };
    let len = work[0].len();
    let n = work.len();
    let fro = work.iter().map(|c| dot(c, c)).sum::<f64>().sqrt();
    let zero_tol = ZERO_COLUMN_TOL * fro;

    let (q, mut core) = if len > n {
        let qr = gram_schmidt(work, zero_tol, true)?;
        (Some(qr.q), qr.r)
    } else {
        (None, work)
    };

    let mut right: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    jacobi_sweeps(&mut core, &mut right, zero_tol).map_err(|sweeps| {
        Error::Numeric(format!(
            "one-sided Jacobi did not converge within {sweeps} sweeps on a {rows}x{cols} matrix"
        ))
    })?;

    let sigma: Vec<f64> = core.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    order.truncate(k);

    // Left vectors of the square core, completed where σ is numerically zero.
    let core_len = core[0].len();
    let mut left: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            let s = sigma[j];
            if s > zero_tol && s > 0.0 {
                Some(core[j].iter().map(|v| v / s).collect())
            } else {
                None
            }
        })
        .collect();
    complete_orthonormal(&mut left, core_len);
    let mut left: Vec<Vec<f64>> = left.into_iter().map(Option::unwrap).collect();

    if let Some(q) = &q {
        left = left
            .iter()
            .map(|c| {
                let mut out = vec![0.0; len];
                for (qi, &ci) in q.iter().zip(c) {
                    if ci != 0.0 {
                        axpy(ci, qi, &mut out);
                    }
                }
                out
            })
            .collect();
    }
    let right_sel: Vec<Vec<f64>> = order.iter().map(|&j| right[j].clone()).collect();
    let s: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();

    let (mut u_cols, mut v_cols) = if transposed {
        (right_sel, left)
    } else {
        (left, right_sel)
    };
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if canonical_sign(uc) < 0.0 {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(ThinSvd {
        u: Mat::from_columns(rows, &u_cols),
        s,
        v: Mat::from_columns(cols, &v_cols),
    })
}

/// Leading triplets of a wide matrix in `O(rows² + cols·k)` extra memory.
///
/// The eigenvectors of the (centered) row Gram matrix give a first basis
/// `V₀ = Mᵀ W Λ^{-1/2}`; one Rayleigh–Ritz step on `M V₀` then restores full
/// accuracy of the retained singular values. Returns `None` when a retained
/// singular value is numerically zero, so the caller can fall back to the
/// exact path.
fn wide_via_gram(m: &Mat, k: usize, means: &[f64]) -> Result<Option<ThinSvd>> {
    let (rows, cols) = m.shape();
    let mu_mu = dot(means, means);
    let mu_x: Vec<f64> = (0..rows).map(|i| dot(m.row(i), means)).collect();
    let mut gram = Mat::zeros(rows, rows);
    for i in 0..rows {
        for j in 0..=i {
            let g = dot(m.row(i), m.row(j)) - mu_x[i] - mu_x[j] + mu_mu;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let trace: f64 = (0..rows).map(|i| gram[(i, i)]).sum();
    let eig = svd_columns(&gram, k, false)?;
    let floor = (ZERO_COLUMN_TOL * trace.max(0.0).sqrt()).powi(2);
    if eig.s.iter().any(|&l| !(l > floor)) {
        return Ok(None);
    }

    // V₀ = (M − 1μᵀ)ᵀ W Λ^{-1/2}
    let scale: Vec<f64> = eig.s.iter().map(|l| 1.0 / l.sqrt()).collect();
    let w = eig.u.scale_cols(&scale);
    let mut v0 = Mat::zeros(cols, k);
    for i in 0..rows {
        let wi = w.row(i);
        for (l, &x) in m.row(i).iter().enumerate() {
            let out = v0.row_mut(l);
            for (o, &c) in out.iter_mut().zip(wi) {
                *o += x * c;
            }
        }
    }
    for j in 0..k {
        let col_sum: f64 = (0..rows).map(|i| w[(i, j)]).sum();
        for (l, mu) in means.iter().enumerate() {
            v0[(l, j)] -= mu * col_sum;
        }
    }
    let v0 = match super::ops::orthonormalize(&v0) {
        Ok(v) => v,
        Err(_) => return Ok(None),
    };

    // Rayleigh–Ritz on the small projection (M − 1μᵀ) V₀
    let mu_v = v0.t_mul_vec(means);
    let mut proj = m.matmul(&v0);
    for i in 0..rows {
        for (p, mv) in proj.row_mut(i).iter_mut().zip(&mu_v) {
            *p -= mv;
        }
    }
    let small = svd_columns(&proj, k, false)?;
    Ok(Some(ThinSvd {
        u: small.u,
        s: small.s,
        v: v0.matmul(&small.v),
    }))
}

/// Rotates column pairs until all are mutually orthogonal. Returns the sweep
/// budget on failure.
fn jacobi_sweeps(cols: &mut [Vec<f64>], right: &mut [Vec<f64>], zero_tol: f64) -> std::result::Result<(), usize> {
    let n = cols.len();
    if n < 2 {
        return Ok(());
    }
    let rel_tol = f64::EPSILON * (cols[0].len() as f64).sqrt().max(1.0);
    let mut sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = sq[i];
                let beta = sq[j];
                if alpha.sqrt() <= zero_tol || beta.sqrt() <= zero_tol {
                    continue;
                }
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.abs() <= rel_tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cols, i, j, c, s);
                rotate(right, i, j, c, s);
                sq[i] = dot(&cols[i], &cols[i]);
                sq[j] = dot(&cols[j], &cols[j]);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(MAX_SWEEPS)
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(j);
    let ci = &mut head[i];
    let cj = &mut tail[0];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fills `None` slots with unit vectors orthogonal to every other slot.
fn complete_orthonormal(cols: &mut [Option<Vec<f64>>], len: usize) {
    if cols.iter().all(Option::is_some) {
        return;
    }
    let mut next_axis = 0;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        let fill = {
            let basis: Vec<&[f64]> = cols.iter().flatten().map(Vec::as_slice).collect();
            completion_vector(&basis, len, &mut next_axis)
        };
        cols[slot] = Some(fill);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Mat::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn identity_is_its_own_svd() {
        let svd = thin_svd(&Mat::identity(3), 3).unwrap();
        assert_eq!(svd.s, vec![1.0, 1.0, 1.0]);
        assert!(svd.u.sub(&Mat::identity(3)).max_abs() < 1e-15);
        assert!(svd.v.sub(&Mat::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_leading_triplet() {
        let m = Mat::diag(&[3.0, 2.0]);
        let svd = thin_svd(&m, 1).unwrap();
        assert_eq!(svd.s, vec![3.0]);
        assert_eq!(svd.u.col(0), vec![1.0, 0.0]);
        assert_eq!(svd.v.col(0), vec![1.0, 0.0]);
    }

    #[test]
    fn rectangular_reconstructs_both_orientations() {
        for &(r, c) in &[(8, 5), (5, 8), (40, 3), (3, 40), (6, 6)] {
            let m = pseudo_random(r, c, (r * 31 + c) as u64);
            let k = r.min(c);
            let svd = thin_svd(&m, k).unwrap();
            let err = svd.reconstruct().sub(&m).frobenius_norm();
            assert!(err <= 1e-12 * m.frobenius_norm(), "{r}x{c}: {err}");
            assert!(svd.u.gram_deviation() <= 1e-10 * k as f64);
            assert!(svd.v.gram_deviation() <= 1e-10 * k as f64);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_still_orthonormal() {
        let a = pseudo_random(7, 2, 3);
        let b = pseudo_random(2, 5, 4);
        let m = a.matmul(&b);
        let svd = thin_svd(&m, 5).unwrap();
        assert!(svd.s[2] < 1e-13);
        assert!(svd.u.gram_deviation() < 1e-10);
        assert!(svd.v.gram_deviation() < 1e-10);
        assert!(svd.reconstruct().sub(&m).frobenius_norm() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let svd = thin_svd(&Mat::zeros(4, 3), 3).unwrap();
        assert!(svd.s.iter().all(|&s| s == 0.0));
        assert!(svd.u.gram_deviation() < 1e-14);
    }

    #[test]
    fn sign_canon_makes_largest_entry_positive() {
        let m = pseudo_random(9, 4, 11).scale(-1.0);
        let svd = thin_svd(&m, 4).unwrap();
        for j in 0..4 {
            let col = svd.u.col(j);
            let (idx, _) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
            assert!(col[idx] >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let m = Mat::identity(3);
        assert!(matches!(thin_svd(&m, 0), Err(Error::Input(_))));
        assert!(matches!(thin_svd(&m, 4), Err(Error::Input(_))));
        let mut bad = m.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&bad, 1), Err(Error::Input(_))));
    }

    #[test]
    fn deterministic_bits() {
        let m = pseudo_random(12, 7, 5);
        assert_eq!(thin_svd(&m, 7).unwrap(), thin_svd(&m, 7).unwrap());
    }

    #[test]
    fn gram_route_matches_exact_route() {
        let mut m = pseudo_random(12, 300, 9);
        // spread the spectrum and add an offset so centering matters
        for i in 0..12 {
            for (j, v) in m.row_mut(i).iter_mut().enumerate() {
                *v = *v * (1.0 + i as f64) + 0.01 * j as f64;
            }
        }
        for center in [false, true] {
            let means = if center { m.col_means() } else { vec![0.0; 300] };
            let fast = wide_via_gram(&m, 4, &means).unwrap().unwrap();
            let exact = svd_columns(&m, 4, center).unwrap();
            for (a, b) in fast.s.iter().zip(&exact.s) {
                assert!((a - b).abs() < 1e-12 * exact.s[0], "{a} vs {b}");
            }
            assert!(fast.u.sub(&exact.u).max_abs() < 1e-9);
            assert!(fast.v.sub(&exact.v).max_abs() < 1e-9);
            assert!(fast.v.gram_deviation() < 1e-12);
        }
    }

    #[test]
    fn gram_route_defers_on_rank_loss() {
        let m = Mat::from_fn(3, 50, |i, j| if i == 0 { j as f64 } else { 0.0 });
        assert!(wide_via_gram(&m, 2, &[0.0; 50]).unwrap().is_none());
    }

    #[test]
    fn centered_variant_matches_explicit_centering() {
        let m = pseudo_random(10, 4, 9).add(&Mat::from_fn(10, 4, |_, j| j as f64 * 3.0));
        let a = thin_svd_centered(&m, 4).unwrap();
        let b = thin_svd(&m.centered(), 4).unwrap();
        assert_eq!(a.s.len(), b.s.len());
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
