//! Streaming estimators against batch references on simulated streams.

mod common;

use common::{cca_oracle, from_na, gaussian, min_affinity, to_na};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swicca::genoja::{GenOjaConfig, GenOjaState, Operator};
use swicca::linalg::{direction_affinity, orthonormalize, subspace_affinity};
use swicca::simulation::{gen_pair, true_directions, ModelConfig, ModelTruth, Noise};
use swicca::static_cca::Whitening;
use swicca::streaming_pca::{Backend, StepRule, SubspaceState};
use swicca::swicca::{SwiccaConfig, SwiccaState};
use swicca::Mat;

/// Leading `k` right singular vectors from nalgebra's dense SVD.
fn reference_basis(m: &Mat, k: usize) -> Mat {
    let svd = to_na(m).svd(false, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vt = svd.v_t.unwrap();
    Mat::from_fn(m.cols(), k, |i, j| vt[(order[j], i)])
}

fn stream(truth: &ModelTruth, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, Vec<f64>)> {
    (1..=truth.config.n).map(|t| gen_pair(truth, t, rng)).collect()
}

fn rows(pairs: &[(Vec<f64>, Vec<f64>)], side: usize) -> Mat {
    let r: Vec<&Vec<f64>> = pairs.iter().map(|p| if side == 0 { &p.0 } else { &p.1 }).collect();
    Mat::from_rows(&r).unwrap()
}

#[test]
fn trackers_reach_the_batch_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let basis = orthonormalize(&gaussian(100, 2, &mut rng)).unwrap();
    let data = gaussian(500, 2, &mut rng).scale_cols(&[2.0, 1.0]).matmul(&basis.transpose());
    let oracle = reference_basis(&data, 2);
    for backend in [Backend::Grouse, Backend::Isvd] {
        let mut s = SubspaceState::new(100, 2, backend, StepRule::Greedy(1.0), 5).unwrap();
        for i in 0..data.rows() {
            s.update(data.row(i)).unwrap();
        }
        let a = subspace_affinity(s.basis(), &oracle).unwrap();
        assert!(a >= 0.99, "{backend:?}: {a}");
    }
}

#[test]
fn isvd_tracks_a_noisy_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let basis = orthonormalize(&gaussian(60, 3, &mut rng)).unwrap();
    let data = gaussian(2000, 3, &mut rng)
        .scale_cols(&[3.0, 2.0, 1.5])
        .matmul(&basis.transpose())
        .add(&gaussian(2000, 60, &mut rng).scale(0.05));
    let mut s = SubspaceState::new(60, 3, Backend::Isvd, StepRule::default(), 1).unwrap();
    for i in 0..data.rows() {
        s.update(data.row(i)).unwrap();
    }
    assert!(subspace_affinity(s.basis(), &reference_basis(&data, 3)).unwrap() > 0.99);
}

#[test]
fn pinned_window_matches_cca_of_the_window_loadings() {
    let model = ModelConfig { p: 30, q: 20, n: 200, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let truth = ModelTruth::draw(&model, &mut rng).unwrap();
    let pairs = stream(&truth, &mut rng);
    let w = 40;
    let last = &pairs[pairs.len() - w..];
    let (xw, yw) = (rows(last, 0), rows(last, 1));
    let vx = reference_basis(&xw, model.r_x());
    let vy = reference_basis(&yw, model.r_y());

    let mut cfg = SwiccaConfig::new(model.p, model.q, model.r_x(), model.r_y(), w);
    cfg.whitening = Whitening::Inverse;
    let mut s = SwiccaState::with_fixed_bases(cfg, vx.clone(), vy.clone()).unwrap();
    for (x, y) in &pairs {
        s.update(x, y).unwrap();
    }
    let est = s.current().unwrap();

    // CCA of the uncentered loadings, mapped back through the bases
    let oracle = cca_oracle(&xw.matmul(&vx), &yw.matmul(&vy), false);
    let f = vx.matmul(&from_na(&oracle.f));
    let g = vy.matmul(&from_na(&oracle.g));
    assert!(min_affinity(&est.f, &to_na(&f)) > 1.0 - 1e-10);
    assert!(min_affinity(&est.g, &to_na(&g)) > 1.0 - 1e-10);
    for (a, b) in est.corrs.iter().zip(&oracle.corrs) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn swicca_recovers_the_planted_directions_on_a_long_window() {
    let model = ModelConfig { noise: ModelConfig::default_noise(1000), ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let truth = ModelTruth::draw(&model, &mut rng).unwrap();
    let pairs = stream(&truth, &mut rng);
    let cfg = SwiccaConfig::new(model.p, model.q, model.r_x(), model.r_y(), 400).with_backend(Backend::Isvd);
    let mut s = SwiccaState::new(cfg).unwrap();
    for (x, y) in &pairs {
        s.update(x, y).unwrap();
    }
    let est = s.current().unwrap();
    let (f, g) = true_directions(&truth, model.n);
    let fa = direction_affinity(&est.f.col(0), &f.col(0)).unwrap();
    let ga = direction_affinity(&est.g.col(0), &g.col(0)).unwrap();
    assert!(fa > 0.95 && ga > 0.95, "{fa} {ga}");
    assert!((est.corrs[0] - 0.8).abs() < 0.1, "{:?}", est.corrs);
}

#[test]
fn genoja_operators_agree_on_a_simulated_stream() {
    let model = ModelConfig { p: 12, q: 8, n: 300, noise: Noise::Gaussian(0.01), ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let truth = ModelTruth::draw(&model, &mut rng).unwrap();
    let pairs = stream(&truth, &mut rng);
    let dense = GenOjaConfig { c_alpha: 5.0, ..Default::default() };
    let factored = GenOjaConfig { operator: Operator::Factored, ..dense };
    let mut a = GenOjaState::new(12, 8, dense, 9).unwrap();
    let mut b = GenOjaState::new(12, 8, factored, 9).unwrap();
    for (x, y) in &pairs {
        a.update(x, y).unwrap();
        b.update(x, y).unwrap();
    }
    for (u, v) in a.v().iter().zip(b.v()) {
        assert!((u - v).abs() < 1e-10);
    }
}

#[test]
fn genoja_converges_to_the_top_canonical_pair_on_unit_scale_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (p, q, n) = (6, 5, 40_000);
    let (x, y) = common::coupled_views(n, p, q, &[0.9, 0.4], 1.0, &mut rng);
    let oracle = cca_oracle(&x, &y, false);
    let cfg = GenOjaConfig { c_alpha: 0.1, c_beta: 1.0, ..Default::default() };
    let mut s = GenOjaState::new(p, q, cfg, 3).unwrap();
    for i in 0..n {
        s.update(x.row(i), y.row(i)).unwrap();
    }
    let est = s.estimate();
    let fa = direction_affinity(&est.f, &from_na(&oracle.f).col(0)).unwrap();
    let ga = direction_affinity(&est.g, &from_na(&oracle.g).col(0)).unwrap();
    assert!(fa > 0.9 && ga > 0.9, "{fa} {ga}");
}
