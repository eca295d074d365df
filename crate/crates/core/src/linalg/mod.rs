//! Dense linear-algebra primitives shared by the estimators.

mod mat;
mod ops;
mod svd;

pub use mat::{axpy, dot, norm, Mat};
pub use ops::{
    aligned_error, canonical_sign, canonicalize_columns, direction_affinity, normalize_columns,
    orthonormalize, procrustes, subspace_affinity, NormalizedColumns,
};
pub(crate) use ops::gram_schmidt;
pub(crate) use svd::thin_svd_centered;
pub use svd::{thin_svd, ThinSvd, MAX_SWEEPS};
