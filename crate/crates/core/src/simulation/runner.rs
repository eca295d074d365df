use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{gen_pair, true_directions, Drift, ModelConfig, ModelTruth, Noise};
use crate::error::{Error, Result};
use crate::genoja::{GenOjaConfig, GenOjaState};
use crate::io::format_g17;
use crate::linalg::{direction_affinity, dot, orthonormalize, Mat};
use crate::streaming_pca::{Backend, StepRule};
use crate::swicca::{SwiccaConfig, SwiccaState, WindowMode};

/// Noise × drift combinations of the reference study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No noise, no drift.
    NfDf,
    /// Noise, no drift.
    NDf,
    /// No noise, drift.
    NfD,
    /// Noise and drift.
    ND,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::NfDf, Regime::NDf, Regime::NfD, Regime::ND];

    pub fn name(self) -> &'static str {
        match self {
            Regime::NfDf => "nf-df",
            Regime::NDf => "n-df",
            Regime::NfD => "nf-d",
            Regime::ND => "n-d",
        }
    }

    pub fn noisy(self) -> bool {
        matches!(self, Regime::NDf | Regime::ND)
    }

    pub fn drifting(self) -> bool {
        matches!(self, Regime::NfD | Regime::ND)
    }

    pub fn model(self) -> ModelConfig {
        let base = ModelConfig::default();
        ModelConfig {
            noise: if self.noisy() { ModelConfig::default_noise(base.n) } else { Noise::None },
            drift: if self.drifting() { Drift::ContinuousOrthogonal } else { Drift::None },
            ..base
        }
    }

    /// GROUSE (greedy step) with `w = 25` under drift, incremental SVD with
    /// `w = 50` otherwise.
    pub fn swicca_config(self, model: &ModelConfig) -> SwiccaConfig {
        let (backend, w) = if self.drifting() { (Backend::Grouse, 25) } else { (Backend::Isvd, 50) };
        let mut cfg = SwiccaConfig::new(model.p, model.q, model.r_x(), model.r_y(), w).with_backend(backend);
        cfg.x_pca.step = StepRule::Greedy(1.0);
        cfg.y_pca.step = StepRule::Greedy(1.0);
        cfg
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime '{s}' (expected nf-df, n-df, nf-d or n-d)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Methods {
    Swicca,
    GenOja,
    Both,
}

impl Methods {
    fn swicca(self) -> bool {
        matches!(self, Methods::Swicca | Methods::Both)
    }

    fn genoja(self) -> bool {
        matches!(self, Methods::GenOja | Methods::Both)
    }
}

impl FromStr for Methods {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swicca" => Ok(Methods::Swicca),
            "genoja" => Ok(Methods::GenOja),
            "both" => Ok(Methods::Both),
            _ => Err(Error::Config(format!("unknown method '{s}' (expected swicca, genoja or both)"))),
        }
    }
}

/// Gen-Oja constants picked by [`tune_genoja`] over `{0.1, 1, 10}²` on the
/// static noise-free model.
pub const GENOJA_TUNED: (f64, f64) = (0.1, 0.1);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub label: String,
    pub model: ModelConfig,
    /// Template; the seed is replaced per trial.
    pub swicca: SwiccaConfig,
    pub genoja: GenOjaConfig,
    pub methods: Methods,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads across trials; results do not depend on it.
    pub threads: usize,
}

impl RunConfig {
    pub fn for_regime(regime: Regime, methods: Methods, trials: usize, seed: u64) -> Self {
        let model = regime.model();
        Self {
            label: regime.name().into(),
            swicca: regime.swicca_config(&model),
            genoja: GenOjaConfig {
                c_alpha: GENOJA_TUNED.0,
                c_beta: GENOJA_TUNED.1,
                ..Default::default()
            },
            model,
            methods,
            trials,
            seed,
            threads: 1,
        }
    }
}

/// Mean curve of one metric across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurve {
    pub metric: String,
    pub component: usize,
    /// Mean over trials at `t = 1..=n`; NaN where no trial reported a value.
    pub mean: Vec<f64>,
    /// Value at `t = n` for every trial (NaN if missing).
    pub finals: Vec<f64>,
}

impl MetricCurve {
    pub fn final_mean(&self) -> f64 {
        let v: Vec<f64> = self.finals.iter().copied().filter(|v| !v.is_nan()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn final_sd(&self) -> f64 {
        let v: Vec<f64> = self.finals.iter().copied().filter(|v| !v.is_nan()).collect();
        if v.len() < 2 {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub threads: usize,
    pub curves: Vec<MetricCurve>,
}

impl RunResult {
    pub fn curve(&self, metric: &str, component: usize) -> Option<&MetricCurve> {
        self.curves.iter().find(|c| c.metric == metric && c.component == component)
    }

    pub fn final_mean(&self, metric: &str, component: usize) -> Option<f64> {
        self.curve(metric, component).map(MetricCurve::final_mean)
    }

    /// `t,component,metric,value` rows of every mean curve.
    pub fn metrics_csv(&self) -> String {
        let mut out = format!(
            "# run={} trials={} seed={} threads={}\nt,component,metric,value\n",
            self.label, self.trials, self.seed, self.threads
        );
        for t in 0..self.n {
            for c in &self.curves {
                let v = c.mean[t];
                if !v.is_nan() {
                    out.push_str(&format!("{},{},{},{}\n", t + 1, c.component, c.metric, format_g17(v)));
                }
            }
        }
        out
    }

    /// Final-time mean and standard deviation across trials.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("metric,component,final_mean,final_sd,trials\n");
        for c in &self.curves {
            let counted = c.finals.iter().filter(|v| !v.is_nan()).count();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.metric,
                c.component,
                format_g17(c.final_mean()),
                format_g17(c.final_sd()),
                counted
            ));
        }
        out
    }
}

/// SplitMix64 finalizer; spreads `(seed, trial)` into independent seeds.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn schema(cfg: &RunConfig) -> Vec<(String, usize)> {
    let m = &cfg.model;
    let mut s = Vec::new();
    if cfg.methods.swicca() {
        for k in 1..=m.r_c() {
            s.push(("swicca_f_affinity".to_string(), k));
            s.push(("swicca_g_affinity".to_string(), k));
            s.push(("swicca_corr".to_string(), k));
        }
        for k in 1..=m.r_x() {
            s.push(("swicca_pca_x_affinity".to_string(), k));
        }
        for k in 1..=m.r_y() {
            s.push(("swicca_pca_y_affinity".to_string(), k));
        }
        if cfg.swicca.window_mode == WindowMode::Samples {
            for k in 1..=m.r_x() {
                s.push(("swicca_loading_x_affinity".to_string(), k));
            }
            for k in 1..=m.r_y() {
                s.push(("swicca_loading_y_affinity".to_string(), k));
            }
        }
    }
    if cfg.methods.genoja() {
        s.push(("genoja_f_affinity".to_string(), 1));
        s.push(("genoja_g_affinity".to_string(), 1));
    }
    s
}

/// `‖V̂ᵀv‖²` for unit `v`: how much of a true direction the estimate captures.
fn captured(basis: &Mat, v: &[f64]) -> f64 {
    let c = basis.t_mul_vec(v);
    (dot(&c, &c) / dot(v, v)).clamp(0.0, 1.0)
}

/// Captured fraction of each true window loading by the estimated loadings' span.
fn loading_affinities(window: &Mat, v_true: &Mat, v_est: &Mat) -> Option<Vec<f64>> {
    if window.rows() < v_est.cols() {
        return None;
    }
    let q = orthonormalize(&window.matmul(v_est)).ok()?;
    let u = window.matmul(v_true);
    Some((0..u.cols()).map(|k| captured(&q, &u.col(k))).collect())
}

fn run_trial(cfg: &RunConfig, trial: usize, schema_len: usize) -> Result<Vec<Vec<f64>>> {
    let n = cfg.model.n;
    let mut curves = vec![vec![f64::NAN; n]; schema_len];
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, trial as u64));
    let truth = ModelTruth::draw(&cfg.model, &mut rng)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut scfg = cfg.swicca.clone();
    scfg.seed = rng.random();
    let mut swicca = if cfg.methods.swicca() { Some(SwiccaState::new(scfg)?) } else { None };
    let gseed: u64 = rng.random();
    let mut genoja = if cfg.methods.genoja() {
        Some(GenOjaState::new(cfg.model.p, cfg.model.q, cfg.genoja.clone(), gseed)?)
    } else {
        None
    };
    let (rx, ry, rc) = (cfg.model.r_x(), cfg.model.r_y(), cfg.model.r_c());
    for t in 1..=n {
        let (x, y) = gen_pair(&truth, t, &mut data_rng);
        let (f_true, g_true) = true_directions(&truth, t);
        let mut slot = 0;
        let put = |curves: &mut Vec<Vec<f64>>, slot: &mut usize, v: Option<f64>| {
            if let Some(v) = v {
                curves[*slot][t - 1] = v;
            }
            *slot += 1;
        };
        if let Some(s) = swicca.as_mut() {
            let est = s.update(&x, &y)?.cloned();
            for k in 0..rc {
                let ok = est.as_ref().filter(|e| e.k() > k);
                put(&mut curves, &mut slot, ok.map(|e| direction_affinity(&e.f.col(k), &f_true.col(k))).transpose()?);
                put(&mut curves, &mut slot, ok.map(|e| direction_affinity(&e.g.col(k), &g_true.col(k))).transpose()?);
                put(&mut curves, &mut slot, ok.map(|e| e.corrs[k]));
            }
            let (vx, vy) = (truth.basis_x(t), truth.basis_y(t));
            for k in 0..rx {
                put(&mut curves, &mut slot, Some(captured(s.pca_x().basis(), &vx.col(k))));
            }
            for k in 0..ry {
                put(&mut curves, &mut slot, Some(captured(s.pca_y().basis(), &vy.col(k))));
            }
            if cfg.swicca.window_mode == WindowMode::Samples {
                let (wx, wy): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) = s.window().iter().unzip();
                let lx = loading_affinities(&Mat::from_rows(&wx)?, &vx, s.pca_x().basis());
                let ly = loading_affinities(&Mat::from_rows(&wy)?, &vy, s.pca_y().basis());
                for k in 0..rx {
                    put(&mut curves, &mut slot, lx.as_ref().map(|v| v[k]));
                }
                for k in 0..ry {
                    put(&mut curves, &mut slot, ly.as_ref().map(|v| v[k]));
                }
            }
        }
        if let Some(g) = genoja.as_mut() {
            let est = g.update(&x, &y)?;
            let fa = est.ready.then(|| direction_affinity(&est.f, &f_true.col(0))).transpose()?;
            let ga = est.ready.then(|| direction_affinity(&est.g, &g_true.col(0))).transpose()?;
            put(&mut curves, &mut slot, fa);
            put(&mut curves, &mut slot, ga);
        }
    }
    Ok(curves)
}

/// Runs every trial and averages the per-`t` metric curves.
pub fn run_regime(cfg: &RunConfig) -> Result<RunResult> {
    cfg.model.validate()?;
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let schema = schema(cfg);
    let threads = cfg.threads.clamp(1, cfg.trials);
    let mut per_trial: Vec<Option<Vec<Vec<f64>>>> = vec![None; cfg.trials];
    if threads == 1 {
        for (i, slot) in per_trial.iter_mut().enumerate() {
            *slot = Some(run_trial(cfg, i, schema.len())?);
        }
    } else {
        let results: Vec<Result<Vec<(usize, Vec<Vec<f64>>)>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let schema_len = schema.len();
                    scope.spawn(move || {
                        (w..cfg.trials)
                            .step_by(threads)
                            .map(|i| run_trial(cfg, i, schema_len).map(|c| (i, c)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
        });
        for r in results {
            for (i, c) in r? {
                per_trial[i] = Some(c);
            }
        }
    }
    let n = cfg.model.n;
    let curves = schema
        .iter()
        .enumerate()
        .map(|(j, (metric, component))| {
            let mut sum = vec![0.0; n];
            let mut count = vec![0u32; n];
            let mut finals = Vec::with_capacity(cfg.trials);
            for trial in per_trial.iter().flatten() {
                for (t, &v) in trial[j].iter().enumerate() {
                    if !v.is_nan() {
                        sum[t] += v;
                        count[t] += 1;
                    }
                }
                finals.push(trial[j][n - 1]);
            }
            MetricCurve {
                metric: metric.clone(),
                component: *component,
                mean: sum
                    .iter()
                    .zip(&count)
                    .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
                    .collect(),
                finals,
            }
        })
        .collect();
    Ok(RunResult {
        label: cfg.label.clone(),
        n,
        trials: cfg.trials,
        seed: cfg.seed,
        threads,
        curves,
    })
}

/// Mean final first-direction affinity of Gen-Oja for every `(c_α, c_β)`
/// in `grid × grid` on the static noise-free model.
pub fn tune_genoja(grid: &[f64], trials: usize, seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for &ca in grid {
        for &cb in grid {
            let mut cfg = RunConfig::for_regime(Regime::NfDf, Methods::GenOja, trials, seed);
            cfg.genoja.c_alpha = ca;
            cfg.genoja.c_beta = cb;
            let res = run_regime(&cfg)?;
            let score = res.final_mean("genoja_f_affinity", 1).unwrap_or(f64::NAN);
            out.push((ca, cb, score));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(regime: Regime, methods: Methods) -> RunConfig {
        let mut cfg = RunConfig::for_regime(regime, methods, 2, 11);
        cfg.model.n = 120;
        cfg
    }

    #[test]
    fn regime_names_round_trip() {
        for r in Regime::ALL {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
        assert!("x".parse::<Regime>().is_err());
        assert!("both".parse::<Methods>().is_ok());
    }

    #[test]
    fn seeds_are_spread() {
        let s: Vec<u64> = (0..4).map(|i| trial_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 4);
        assert_eq!(trial_seed(7, 0), s[0]);
    }

    #[test]
    fn runs_are_deterministic_and_thread_independent() {
        let cfg = small(Regime::ND, Methods::Both);
        let a = run_regime(&cfg).unwrap();
        let b = run_regime(&cfg).unwrap();
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        let mut par = cfg.clone();
        par.threads = 2;
        let c = run_regime(&par).unwrap();
        assert_eq!(a.metrics_csv().lines().skip(1).collect::<Vec<_>>(), c.metrics_csv().lines().skip(1).collect::<Vec<_>>());
        assert_eq!(a.summary_csv(), c.summary_csv());
    }

    #[test]
    fn metrics_are_in_unit_interval() {
        for regime in Regime::ALL {
            let res = run_regime(&small(regime, Methods::Both)).unwrap();
            for c in &res.curves {
                for v in c.mean.iter().filter(|v| !v.is_nan()) {
                    assert!((0.0..=1.0 + 1e-12).contains(v), "{} {}: {v}", c.metric, c.component);
                }
            }
            assert!(res.final_mean("swicca_f_affinity", 1).is_some());
        }
    }

    #[test]
    fn csv_layout() {
        let res = run_regime(&small(Regime::NfDf, Methods::Swicca)).unwrap();
        let csv = res.metrics_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# run=nf-df"));
        assert_eq!(lines.next().unwrap(), "t,component,metric,value");
        // SWICCA warms up after max(r_x, r_y) = 3 samples
        assert!(lines.next().unwrap().starts_with("1,1,swicca_pca_x_affinity,"));
        assert!(csv.contains("\n3,1,swicca_f_affinity,"));
        assert!(!csv.contains("\n2,1,swicca_f_affinity,"));
        assert!(res.summary_csv().starts_with("metric,component,final_mean,final_sd,trials\n"));
    }
}
