use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{gen_pair, ModelConfig, ModelTruth};
use crate::error::{Error, Result};
use crate::genoja::{GenOjaConfig, GenOjaState};
use crate::io::format_g17;
use crate::streaming_pca::Backend;
use crate::swicca::{SwiccaConfig, SwiccaState, WindowMode};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub q: usize,
    pub r_x: usize,
    pub r_y: usize,
    pub window: usize,
    /// Untimed updates before measuring (at least 200).
    pub warmup: usize,
    pub measured: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            q: 50,
            r_x: 2,
            r_y: 3,
            window: 25,
            warmup: 200,
            measured: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub p: usize,
    pub method: &'static str,
    pub mode: &'static str,
    /// Median wall time of one update.
    pub ns_per_update: f64,
    pub state_bytes: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

enum Runner {
    Swicca(Box<SwiccaState>),
    GenOja(Box<GenOjaState>),
}

impl Runner {
    fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        match self {
            Runner::Swicca(s) => s.update(x, y).map(|_| ()),
            Runner::GenOja(g) => g.update(x, y).map(|_| ()),
        }
    }

    fn state_bytes(&self) -> usize {
        match self {
            Runner::Swicca(s) => s.state_bytes(),
            Runner::GenOja(g) => g.state_bytes(),
        }
    }
}

struct Case {
    p: usize,
    method: &'static str,
    mode: &'static str,
    stream: usize,
    runner: Runner,
    times: Vec<f64>,
}

/// Per-update median time and retained bytes of SWICCA (samples and loadings
/// windows, GROUSE trackers) and dense Gen-Oja for each `p` in `dims`.
///
/// Measured updates are interleaved round-robin across all cases, so a slow
/// stretch of the machine is spread over every `p` instead of skewing one.
pub fn bench_scaling(dims: &[usize], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.warmup < 200 || cfg.measured == 0 {
        return Err(Error::Config(format!(
            "bench needs >= 200 warm-up and >= 1 measured updates (got {} and {})",
            cfg.warmup, cfg.measured
        )));
    }
    if dims.is_empty() || dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("bench dims must be non-empty and increasing, got {dims:?}")));
    }
    let mut streams = Vec::new();
    let mut cases = Vec::new();
    for &p in dims {
        let model = ModelConfig {
            p,
            q: cfg.q,
            sigma_x: (1..=cfg.r_x).rev().map(|v| v as f64).collect(),
            sigma_y: (1..=cfg.r_y).rev().map(|v| v as f64).collect(),
            rho: vec![0.8, 0.5].into_iter().take(cfg.r_x.min(cfg.r_y)).collect(),
            n: cfg.warmup + cfg.measured,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ p as u64);
        let truth = ModelTruth::draw(&model, &mut rng)?;
        let data: Vec<_> = (1..=model.n).map(|t| gen_pair(&truth, t, &mut rng)).collect();
        let stream = streams.len();
        streams.push(data);

        for (mode, wm) in [("samples", WindowMode::Samples), ("loadings", WindowMode::Loadings)] {
            let mut sc = SwiccaConfig::new(p, cfg.q, cfg.r_x, cfg.r_y, cfg.window).with_backend(Backend::Grouse);
            sc.window_mode = wm;
            sc.seed = rng.random();
            cases.push(Case {
                p,
                method: "swicca",
                mode,
                stream,
                runner: Runner::Swicca(Box::new(SwiccaState::new(sc)?)),
                times: Vec::with_capacity(cfg.measured),
            });
        }
        let g = GenOjaState::new(p, cfg.q, GenOjaConfig::default(), rng.random())?;
        cases.push(Case {
            p,
            method: "genoja",
            mode: "dense",
            stream,
            runner: Runner::GenOja(Box::new(g)),
            times: Vec::with_capacity(cfg.measured),
        });
    }

    for case in &mut cases {
        for (x, y) in &streams[case.stream][..cfg.warmup] {
            case.runner.update(x, y)?;
        }
    }
    for i in cfg.warmup..cfg.warmup + cfg.measured {
        for case in &mut cases {
            let (x, y) = &streams[case.stream][i];
            let start = Instant::now();
            case.runner.update(x, y)?;
            case.times.push(start.elapsed().as_nanos() as f64);
        }
    }
    Ok(cases
        .into_iter()
        .map(|c| BenchRow {
            p: c.p,
            method: c.method,
            mode: c.mode,
            ns_per_update: median(c.times),
            state_bytes: c.runner.state_bytes(),
        })
        .collect())
}

/// `p,method,mode,ns_per_update,state_bytes` rows.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("p,method,mode,ns_per_update,state_bytes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.p,
            r.method,
            r.mode,
            format_g17(r.ns_per_update),
            r.state_bytes
        ));
    }
    out
}
