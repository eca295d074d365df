#![allow(dead_code)]

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use swicca::linalg::direction_affinity;
use swicca::Mat;

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn from_na(m: &DMatrix<f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Views sharing `k` latent factors with correlations `rho`, plus unit noise.
pub fn coupled_views(n: usize, p: usize, q: usize, rho: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> (Mat, Mat) {
    let k = rho.len();
    let ax = gaussian(k, p, rng);
    let ay = gaussian(k, q, rng);
    let mut x = gaussian(n, p, rng).scale(noise);
    let mut y = gaussian(n, q, rng).scale(noise);
    for i in 0..n {
        for (c, &r) in rho.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let zy = r * z + (1.0 - r * r).sqrt() * e;
            for j in 0..p {
                x.row_mut(i)[j] += z * ax.row(c)[j];
            }
            for j in 0..q {
                y.row_mut(i)[j] += zy * ay.row(c)[j];
            }
        }
    }
    (x, y)
}

/// Canonical pairs from the eigenproblem `Σx⁻¹ Σxy Σy⁻¹ Σyx f = ρ² f`, solved
/// through the similar symmetric matrix `L⁻¹ Σxy Σy⁻¹ Σyx L⁻ᵀ` with `Σx = LLᵀ`.
pub struct CcaOracle {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub corrs: Vec<f64>,
}

pub fn cca_oracle(x: &Mat, y: &Mat, center: bool) -> CcaOracle {
    let n = x.rows() as f64;
    let (xc, yc) = if center { (to_na(&x.centered()), to_na(&y.centered())) } else { (to_na(x), to_na(y)) };
    let sxx = xc.transpose() * &xc / n;
    let syy = yc.transpose() * &yc / n;
    let sxy = xc.transpose() * &yc / n;
    let syy_inv = syy.clone().try_inverse().unwrap();
    let l = Cholesky::new(sxx).unwrap().l();
    let l_inv = l.clone().try_inverse().unwrap();
    let m = &l_inv * &sxy * &syy_inv * sxy.transpose() * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = x.cols().min(y.cols());
    let mut f = DMatrix::zeros(x.cols(), k);
    let mut g = DMatrix::zeros(y.cols(), k);
    let mut corrs = Vec::new();
    for (c, &i) in order.iter().take(k).enumerate() {
        let fi = l_inv.transpose() * eig.eigenvectors.column(i);
        let gi = &syy_inv * sxy.transpose() * &fi;
        f.set_column(c, &fi.normalize());
        g.set_column(c, &gi.normalize());
        corrs.push(eig.eigenvalues[i].max(0.0).sqrt());
    }
    CcaOracle { f, g, corrs }
}

pub fn min_affinity(a: &Mat, b: &DMatrix<f64>) -> f64 {
    let b = from_na(b);
    (0..a.cols())
        .map(|j| direction_affinity(&a.col(j), &b.col(j)).unwrap())
        .fold(1.0, f64::min)
}

/// The last `w` samples of a simulated stream, as `(X_w, Y_w)`.
pub fn model_window(
    model: &swicca::simulation::ModelConfig,
    w: usize,
    rng: &mut ChaCha8Rng,
) -> (swicca::simulation::ModelTruth, Mat, Mat) {
    use swicca::simulation::{gen_pair, ModelTruth};
    let truth = ModelTruth::draw(model, rng).unwrap();
    let pairs: Vec<_> = (model.n - w + 1..=model.n).map(|t| gen_pair(&truth, t, rng)).collect();
    let x = Mat::from_rows(&pairs.iter().map(|p| p.0.clone()).collect::<Vec<_>>()).unwrap();
    let y = Mat::from_rows(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>()).unwrap();
    (truth, x, y)
}

/// A randomized model in the style of the simulation study.
pub fn fuzzed_model(rng: &mut ChaCha8Rng) -> swicca::simulation::ModelConfig {
    use swicca::simulation::{Drift, ModelConfig, Noise};
    let r_x = rng.random_range(1..=3);
    let r_y = rng.random_range(1..=4);
    let desc = |r: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..4.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let sigma_x = desc(r_x, rng);
    let sigma_y = desc(r_y, rng);
    let mut rho: Vec<f64> = (0..r_x.min(r_y)).map(|_| rng.random_range(0.2..0.95)).collect();
    rho.sort_by(|a, b| b.total_cmp(a));
    let n = 1000;
    ModelConfig {
        p: rng.random_range(20..=120),
        q: rng.random_range(10..=60),
        sigma_x,
        sigma_y,
        rho,
        n,
        noise: if rng.random_bool(0.5) { ModelConfig::default_noise(n) } else { Noise::None },
        drift: if rng.random_bool(0.5) { Drift::ContinuousOrthogonal } else { Drift::None },
    }
}
