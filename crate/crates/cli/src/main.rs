use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swicca::diagnostics::{aggregate_bounds, perturb_basis, BoundOptions, SideTruth};
use swicca::genoja::{GenOjaConfig, GenOjaState};
use swicca::io::{format_g17, read_matrix, write_matrix};
use swicca::linalg::direction_affinity;
use swicca::simulation::{
    bench_csv, bench_scaling, gen_pair, run_regime, BenchConfig, Methods, ModelTruth, Regime, RunConfig,
};
use swicca::static_cca::{fit_cca, fit_icca, fit_icca_scalable, FitOptions};
use swicca::streaming_pca::Backend;
use swicca::swicca::{CorrMode, SwiccaConfig, SwiccaState, WindowMode};
use swicca::{Error, Mat};

/// Streaming and batch canonical correlation analysis.
#[derive(Debug, Parser)]
#[command(name = "swicca", version, arg_required_else_help = true)]
struct Cli {
    /// Seed for every random initialization and simulated stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory (depends on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Batch CCA on two data files.
    #[command(subcommand, arg_required_else_help = true)]
    Cca(CcaCommand),
    /// Sliding-window informative CCA over two row streams.
    #[command(subcommand, arg_required_else_help = true)]
    Swicca(SwiccaCommand),
    /// Gen-Oja baseline over two row streams.
    #[command(subcommand, arg_required_else_help = true)]
    Genoja(GenojaCommand),
    /// Synthetic experiments.
    #[command(subcommand, arg_required_else_help = true)]
    Sim(SimCommand),
    /// Perturbation-bound diagnostics.
    #[command(subcommand, arg_required_else_help = true)]
    Diag(DiagCommand),
}

#[derive(Debug, Subcommand)]
enum CcaCommand {
    /// Writes F.csv, G.csv and corrs.csv under --out.
    Fit(CcaFit),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitMethod {
    Full,
    Icca,
    Scalable,
}

#[derive(Debug, Args)]
struct CcaFit {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    rank_x: Option<usize>,
    #[arg(long)]
    rank_y: Option<usize>,
    /// Defaults to `scalable` when ranks are given, `full` otherwise.
    #[arg(long, value_enum)]
    method: Option<FitMethod>,
}

#[derive(Debug, Subcommand)]
enum SwiccaCommand {
    /// One CSV row per update: t, correlations, optional truth affinities.
    Stream(SwiccaStream),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Grouse,
    Isvd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorrArg {
    D,
    Empirical,
}

#[derive(Debug, Args)]
struct TruthArgs {
    /// True x directions (p×k) for affinity columns.
    #[arg(long, requires = "truth_g")]
    truth_f: Option<PathBuf>,
    /// True y directions (q×k).
    #[arg(long, requires = "truth_f")]
    truth_g: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SwiccaStream {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    rank_x: usize,
    #[arg(long)]
    rank_y: usize,
    #[arg(long)]
    window: usize,
    #[arg(long, value_enum, default_value = "grouse")]
    backend: BackendArg,
    /// Keep PCA loadings in the window instead of raw samples.
    #[arg(long)]
    loadings_window: bool,
    #[arg(long, value_enum, default_value = "d")]
    corr: CorrArg,
    #[command(flatten)]
    truth: TruthArgs,
}

#[derive(Debug, Subcommand)]
enum GenojaCommand {
    /// One CSV row per update: t, step change, optional truth affinities.
    Stream(GenojaStream),
}

#[derive(Debug, Args)]
struct GenojaStream {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    truth: TruthArgs,
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Monte-Carlo run of one regime; writes metrics.csv and summary.csv.
    Run(SimRun),
    /// Per-update cost versus dimension; writes bench.csv.
    Bench(SimBench),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Swicca,
    Genoja,
    Both,
}

#[derive(Debug, Args)]
struct SimRun {
    /// nf-df, n-df, nf-d or n-d.
    #[arg(long)]
    regime: String,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodArg,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

#[derive(Debug, Args)]
struct SimBench {
    #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096")]
    dims: Vec<usize>,
}

#[derive(Debug, Subcommand)]
enum DiagCommand {
    /// Prints the error report for bases perturbed by --eps as key,value CSV.
    Bounds(DiagBounds),
}

#[derive(Debug, Args)]
struct DiagBounds {
    #[arg(long)]
    eps: f64,
    /// Simulation regime whose model supplies the window.
    #[arg(long, default_value = "nf-df")]
    model: String,
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 1,
            Error::Input(_) => 2,
            Error::Numeric(_) | Error::Rank(_) => 3,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("swicca: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let seed = cli.seed;
    let out = cli.out;
    match cli.command {
        Command::Cca(CcaCommand::Fit(a)) => cca_fit(&a, require_out(out)?),
        Command::Swicca(SwiccaCommand::Stream(a)) => swicca_stream(&a, seed, require_out(out)?),
        Command::Genoja(GenojaCommand::Stream(a)) => genoja_stream(&a, seed, require_out(out)?),
        Command::Sim(SimCommand::Run(a)) => sim_run(&a, seed, require_out(out)?),
        Command::Sim(SimCommand::Bench(a)) => sim_bench(&a, seed, require_out(out)?),
        Command::Diag(DiagCommand::Bounds(a)) => diag_bounds(&a, seed, out),
    }
}

fn require_out(out: Option<PathBuf>) -> CliResult<PathBuf> {
    out.ok_or_else(|| Failure::usage("--out is required for this subcommand"))
}

fn threads_from_env() -> CliResult<usize> {
    match std::env::var("SWICCA_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::usage(format!("SWICCA_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))
}

/// Reads both data files and checks that they pair up row by row.
fn read_pair(x: &Path, y: &Path) -> CliResult<(Mat, Mat)> {
    let xm = read_matrix(x)?;
    let ym = read_matrix(y)?;
    if xm.rows() != ym.rows() {
        return Err(Failure::input(format!(
            "row counts differ: {} has {} rows, {} has {} rows",
            x.display(),
            xm.rows(),
            y.display(),
            ym.rows()
        )));
    }
    Ok((xm, ym))
}

fn read_truth(truth: &TruthArgs, p: usize, q: usize) -> CliResult<Option<(Mat, Mat)>> {
    let (Some(tf), Some(tg)) = (&truth.truth_f, &truth.truth_g) else {
        return Ok(None);
    };
    let f = read_matrix(tf)?;
    let g = read_matrix(tg)?;
    if f.rows() != p || g.rows() != q || f.cols() != g.cols() {
        return Err(Failure::input(format!(
            "truth shapes {}x{} ({}) and {}x{} ({}) do not match data dimensions {p} and {q}",
            f.rows(),
            f.cols(),
            tf.display(),
            g.rows(),
            g.cols(),
            tg.display()
        )));
    }
    Ok(Some((f, g)))
}

fn push_value(line: &mut String, v: f64) {
    line.push(',');
    line.push_str(&format_g17(v));
}

fn cca_fit(a: &CcaFit, out: PathBuf) -> CliResult {
    let method = a.method.unwrap_or(if a.rank_x.is_some() || a.rank_y.is_some() {
        FitMethod::Scalable
    } else {
        FitMethod::Full
    });
    let ranks = match (method, a.rank_x, a.rank_y) {
        (FitMethod::Full, _, _) => None,
        (_, Some(rx), Some(ry)) => Some((rx, ry)),
        _ => return Err(Failure::usage("--method icca/scalable needs both --rank-x and --rank-y")),
    };
    let (x, y) = read_pair(&a.x, &a.y)?;
    let opts = FitOptions::default();
    let est = match (method, ranks) {
        (FitMethod::Icca, Some((rx, ry))) => fit_icca(&x, &y, rx, ry, &opts)?,
        (FitMethod::Scalable, Some((rx, ry))) => fit_icca_scalable(&x, &y, rx, ry, &opts)?,
        _ => fit_cca(&x, &y, &opts)?,
    };
    create_dir(&out)?;
    write_matrix(&out.join("F.csv"), &est.f)?;
    write_matrix(&out.join("G.csv"), &est.g)?;
    write_matrix(&out.join("corrs.csv"), &Mat::from_columns(est.corrs.len(), &[&est.corrs]))?;
    Ok(())
}

fn affinities(est_f: &Mat, est_g: &Mat, truth: &(Mat, Mat), line: &mut String) -> CliResult {
    for k in 0..truth.0.cols() {
        for (est, tr) in [(est_f, &truth.0), (est_g, &truth.1)] {
            let v = if k < est.cols() { direction_affinity(&est.col(k), &tr.col(k))? } else { f64::NAN };
            push_value(line, v);
        }
    }
    Ok(())
}

fn swicca_stream(a: &SwiccaStream, seed: u64, out: PathBuf) -> CliResult {
    let (x, y) = read_pair(&a.x, &a.y)?;
    let truth = read_truth(&a.truth, x.cols(), y.cols())?;
    let backend = match a.backend {
        BackendArg::Grouse => Backend::Grouse,
        BackendArg::Isvd => Backend::Isvd,
    };
    let mut cfg = SwiccaConfig::new(x.cols(), y.cols(), a.rank_x, a.rank_y, a.window).with_backend(backend);
    cfg.window_mode = if a.loadings_window { WindowMode::Loadings } else { WindowMode::Samples };
    cfg.corr_mode = match a.corr {
        CorrArg::D => CorrMode::DiagonalD,
        CorrArg::Empirical => CorrMode::EmpiricalWindow,
    };
    cfg.seed = seed;
    let mut state = SwiccaState::new(cfg)?;
    let k = a.rank_x.min(a.rank_y);

    let mut text = String::from("t");
    for c in 1..=k {
        let _ = write!(text, ",corr_{c}");
    }
    if let Some((f, _)) = &truth {
        for c in 1..=f.cols() {
            let _ = write!(text, ",f_affinity_{c},g_affinity_{c}");
        }
    }
    text.push('\n');
    for t in 0..x.rows() {
        let mut line = format!("{}", t + 1);
        match state.update(x.row(t), y.row(t))? {
            Some(est) => {
                for c in 0..k {
                    push_value(&mut line, est.corrs.get(c).copied().unwrap_or(f64::NAN));
                }
                if let Some(tr) = &truth {
                    affinities(&est.f, &est.g, tr, &mut line)?;
                }
            }
            None => {
                let extra = truth.as_ref().map_or(0, |(f, _)| 2 * f.cols());
                for _ in 0..k + extra {
                    push_value(&mut line, f64::NAN);
                }
            }
        }
        text.push_str(&line);
        text.push('\n');
    }
    write_text(&out, &text)
}

fn genoja_stream(a: &GenojaStream, seed: u64, out: PathBuf) -> CliResult {
    let (x, y) = read_pair(&a.x, &a.y)?;
    let truth = read_truth(&a.truth, x.cols(), y.cols())?;
    let (c_alpha, c_beta) = swicca::simulation::GENOJA_TUNED;
    let cfg = GenOjaConfig { c_alpha, c_beta, ..Default::default() };
    let mut state = GenOjaState::new(x.cols(), y.cols(), cfg, seed)?;

    let mut text = String::from("t,step_change");
    if truth.is_some() {
        text.push_str(",f_affinity_1,g_affinity_1");
    }
    text.push('\n');
    let mut prev = state.v().to_vec();
    for t in 0..x.rows() {
        let est = state.update(x.row(t), y.row(t))?;
        let change = prev.iter().zip(state.v()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prev.copy_from_slice(state.v());
        let mut line = format!("{}", t + 1);
        push_value(&mut line, change);
        if let Some((tf, tg)) = &truth {
            let f = Mat::from_columns(est.f.len(), &[&est.f]);
            let g = Mat::from_columns(est.g.len(), &[&est.g]);
            affinities(&f, &g, &(tf.leading_cols(1), tg.leading_cols(1)), &mut line)?;
        }
        text.push_str(&line);
        text.push('\n');
    }
    write_text(&out, &text)
}

fn sim_run(a: &SimRun, seed: u64, out: PathBuf) -> CliResult {
    let regime: Regime = a.regime.parse().map_err(|e: Error| Failure::usage(format!("--regime: {e}")))?;
    if a.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let methods = match a.method {
        MethodArg::Swicca => Methods::Swicca,
        MethodArg::Genoja => Methods::GenOja,
        MethodArg::Both => Methods::Both,
    };
    let mut cfg = RunConfig::for_regime(regime, methods, a.trials, seed);
    cfg.threads = threads_from_env()?;
    let result = run_regime(&cfg)?;
    create_dir(&out)?;
    write_text(&out.join("metrics.csv"), &result.metrics_csv())?;
    write_text(&out.join("summary.csv"), &result.summary_csv())
}

fn sim_bench(a: &SimBench, seed: u64, out: PathBuf) -> CliResult {
    let cfg = BenchConfig { seed, ..Default::default() };
    let rows = bench_scaling(&a.dims, &cfg).map_err(|e| match e {
        Error::Config(m) => Failure::usage(format!("--dims: {m}")),
        other => other.into(),
    })?;
    create_dir(&out)?;
    write_text(&out.join("bench.csv"), &bench_csv(&rows))
}

fn diag_bounds(a: &DiagBounds, seed: u64, out: Option<PathBuf>) -> CliResult {
    let regime: Regime = a.model.parse().map_err(|e: Error| Failure::usage(format!("--model: {e}")))?;
    if !(a.eps.is_finite() && a.eps >= 0.0) {
        return Err(Failure::usage(format!("--eps must be a finite non-negative number, got {}", a.eps)));
    }
    let model = regime.model();
    let window = regime.swicca_config(&model).window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = ModelTruth::draw(&model, &mut rng)?;
    let pairs: Vec<_> = (model.n - window + 1..=model.n).map(|t| gen_pair(&truth, t, &mut rng)).collect();
    let xw = Mat::from_rows(&pairs.iter().map(|p| p.0.clone()).collect::<Vec<_>>())?;
    let yw = Mat::from_rows(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>())?;
    let tx = SideTruth::from_window(&xw, model.r_x())?;
    let ty = SideTruth::from_window(&yw, model.r_y())?;
    let vx = perturb_basis(&tx.v, a.eps, &mut rng)?;
    let vy = perturb_basis(&ty.v, a.eps, &mut rng)?;
    let report = aggregate_bounds(&xw, &yw, &tx, &ty, &vx, &vy, &BoundOptions::default())?;

    let mut text = String::from("key,value\n");
    for (k, v) in report.key_values() {
        let _ = writeln!(text, "{k},{}", format_g17(v));
    }
    print!("{text}");
    match out {
        Some(path) => write_text(&path, &text),
        None => Ok(()),
    }
}
