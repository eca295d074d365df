use super::mat::{axpy, dot, norm, Mat};
use super::svd::thin_svd;
use crate::error::{Error, Result};

/// Column-wise QR factor pair: `A = Q·R` with `q[j]`, `r[j]` the j-th columns.
pub(crate) struct GsFactor {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

/// Modified Gram–Schmidt in fixed column order with one re-orthogonalization
/// pass. A column whose remaining norm is at most `pivot_tol` is either a
/// rank error or, with `allow_deficient`, replaced by a completing unit
/// vector with a zero diagonal entry in `R`.
pub(crate) fn gram_schmidt(cols: Vec<Vec<f64>>, pivot_tol: f64, allow_deficient: bool) -> Result<GsFactor> {
    let n = cols.len();
    let len = cols.first().map_or(0, Vec::len);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut next_axis = 0;
    for (j, mut a) in cols.into_iter().enumerate() {
        let mut rcol = vec![0.0; n];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &a);
                rcol[i] += c;
                axpy(-c, qi, &mut a);
            }
        }
        let nrm = norm(&a);
        if nrm > pivot_tol && nrm > 0.0 {
            a.iter_mut().for_each(|v| *v /= nrm);
            rcol[j] = nrm;
            q.push(a);
        } else if allow_deficient {
            let basis: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
            let fill = completion_vector(&basis, len, &mut next_axis);
            q.push(fill);
        } else {
            return Err(Error::Rank(format!(
                "column {j} is numerically dependent on earlier columns (pivot norm {nrm:.3e} <= {pivot_tol:.3e})"
            )));
        }
        r.push(rcol);
    }
    Ok(GsFactor { q, r })
}

/// Unit vector orthogonal to every vector of `basis` (`basis.len() < len`).
///
/// Takes the next coordinate axis from `*next_axis` whose residual keeps more
/// than half its length; when the scan runs out, the axis with the largest
/// residual, which is non-zero because the residual norms² sum to
/// `len − basis.len()`.
pub(crate) fn completion_vector(basis: &[&[f64]], len: usize, next_axis: &mut usize) -> Vec<f64> {
    assert!(basis.len() < len, "cannot complete an orthonormal basis of R^{len}");
    let residual = |axis: usize| {
        let mut cand = vec![0.0; len];
        cand[axis] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &cand);
                axpy(-c, b, &mut cand);
            }
        }
        cand
    };
    let unit = |mut v: Vec<f64>| {
        let nrm = norm(&v);
        v.iter_mut().for_each(|x| *x /= nrm);
        v
    };
    while *next_axis < len {
        let cand = residual(*next_axis);
        *next_axis += 1;
        if norm(&cand) > 0.5 {
            return unit(cand);
        }
    }
    let mut best = residual(0);
    let mut best_norm = norm(&best);
    for axis in 1..len {
        let cand = residual(axis);
        let n = norm(&cand);
        if n > best_norm {
            best = cand;
            best_norm = n;
        }
    }
    unit(best)
}

/// Orthonormal basis for the column span of `m`, same column order.
///
/// Fails with a rank error when a pivot drops below `1e-12·‖m‖_F`.
pub fn orthonormalize(m: &Mat) -> Result<Mat> {
    if m.cols() > m.rows() {
        return Err(Error::Rank(format!(
            "cannot orthonormalize {} columns in R^{}",
            m.cols(),
            m.rows()
        )));
    }
    m.ensure_finite("matrix passed to orthonormalize")?;
    let tol = 1e-12 * m.frobenius_norm();
    let qr = gram_schmidt(m.columns(), tol, false)?;
    Ok(Mat::from_columns(m.rows(), &qr.q))
}

/// Unit-norm columns and their original norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedColumns {
    pub q: Mat,
    pub norms: Vec<f64>,
    /// `true` where the column was exactly zero and left as zero.
    pub zero_mask: Vec<bool>,
}

impl NormalizedColumns {
    pub fn active(&self) -> Vec<usize> {
        (0..self.norms.len()).filter(|&j| !self.zero_mask[j]).collect()
    }
}

/// Divides every column by its ℓ₂ norm. Zero columns stay zero and are
/// flagged in the mask.
pub fn normalize_columns(m: &Mat) -> NormalizedColumns {
    let (rows, cols) = m.shape();
    let mut sq = vec![0.0; cols];
    for i in 0..rows {
        for (s, v) in sq.iter_mut().zip(m.row(i)) {
            *s += v * v;
        }
    }
    let norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let zero_mask: Vec<bool> = norms.iter().map(|&n| n == 0.0 || !n.is_finite()).collect();
    let inv: Vec<f64> = norms
        .iter()
        .zip(&zero_mask)
        .map(|(&n, &z)| if z { 0.0 } else { 1.0 / n })
        .collect();
    NormalizedColumns {
        q: m.scale_cols(&inv),
        norms,
        zero_mask,
    }
}

/// `(uᵀv)² / (‖u‖²‖v‖²)`: 1 for parallel vectors, 0 for orthogonal ones.
pub fn direction_affinity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Input(format!(
            "direction_affinity on vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let uu = dot(u, u);
    let vv = dot(v, v);
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::Input("direction_affinity of a zero vector".into()));
    }
    let uv = dot(u, v);
    Ok(((uv * uv) / (uu * vv)).clamp(0.0, 1.0))
}

/// `‖UᵀV‖_F² / r` for two orthonormal `n×r` bases.
pub fn subspace_affinity(u: &Mat, v: &Mat) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::Input(format!(
            "subspace_affinity on bases of shape {:?} and {:?}",
            u.shape(),
            v.shape()
        )));
    }
    for (name, b) in [("first", u), ("second", v)] {
        let dev = b.gram_deviation();
        if dev > 1e-6 {
            return Err(Error::Input(format!(
                "{name} basis is not orthonormal (Gram deviation {dev:.3e})"
            )));
        }
    }
    let g = u.t_matmul(v);
    let fro = g.frobenius_norm();
    Ok((fro * fro / u.cols() as f64).clamp(0.0, 1.0))
}

/// `+1` or `-1` such that the entry of largest magnitude (lowest index on
/// ties) becomes non-negative.
pub fn canonical_sign(v: &[f64]) -> f64 {
    let mut best = 0.0;
    let mut best_val = 0.0;
    for &x in v {
        if x.abs() > best {
            best = x.abs();
            best_val = x;
        }
    }
    if best_val < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Applies [`canonical_sign`] to every column independently.
pub fn canonicalize_columns(m: &mut Mat) {
    for j in 0..m.cols() {
        let col = m.col(j);
        if canonical_sign(&col) < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Orthogonal `O` minimizing `‖estimate·O − target‖_F`.
pub fn procrustes(estimate: &Mat, target: &Mat) -> Result<Mat> {
    if estimate.shape() != target.shape() {
        return Err(Error::Input(format!(
            "procrustes on shapes {:?} and {:?}",
            estimate.shape(),
            target.shape()
        )));
    }
    let m = estimate.t_matmul(target);
    let k = m.rows();
    let svd = thin_svd(&m, k)?;
    Ok(svd.u.matmul(&svd.v.transpose()))
}

/// `‖estimate·O − target‖_F` for the Procrustes-optimal `O`.
pub fn aligned_error(estimate: &Mat, target: &Mat) -> Result<f64> {
    let o = procrustes(estimate, target)?;
    Ok(estimate.matmul(&o).sub(target).frobenius_norm())
}
