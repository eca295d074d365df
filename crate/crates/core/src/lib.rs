//! Streaming canonical correlation analysis.
//!
//! The centerpiece is [`swicca::SwiccaState`], a sliding-window informative
//! CCA estimator that sits on top of a streaming PCA backend
//! ([`streaming_pca`]). Batch CCA/ICCA live in [`static_cca`], the Gen-Oja
//! baseline in [`genoja`], perturbation-bound bookkeeping in [`diagnostics`]
//! and the synthetic experiment harness in [`simulation`].

pub mod diagnostics;
pub mod error;
pub mod genoja;
pub mod io;
pub mod linalg;
pub mod simulation;
pub mod static_cca;
pub mod streaming_pca;
pub mod swicca;

pub use error::{Error, Result};
pub use linalg::Mat;
