use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swicca::io::{read_matrix, write_matrix};
use swicca::static_cca::{fit_cca, fit_icca_scalable, FitOptions};
use swicca::Mat;
use tempfile::TempDir;

fn swicca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swicca"))
        .args(args)
        .env_remove("SWICCA_THREADS")
        .output()
        .expect("spawn swicca")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Deterministic pseudo-random data with a shared latent column.
fn write_pair(dir: &Path, n: usize, p: usize, q: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut state = 0x1234_5678_u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut x = Mat::zeros(n, p);
    let mut y = Mat::zeros(n, q);
    for i in 0..n {
        let z = next();
        for j in 0..p {
            x.row_mut(i)[j] = next() + if j == 0 { 2.0 * z } else { 0.0 };
        }
        for j in 0..q {
            y.row_mut(i)[j] = next() + if j == 1 { 2.0 * z } else { 0.0 };
        }
    }
    let xp = dir.join("x.csv");
    let yp = dir.join("y.csv");
    write_matrix(&xp, &x).unwrap();
    write_matrix(&yp, &y).unwrap();
    (xp, yp)
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let o = swicca(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let o = swicca(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("sim"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = swicca(&["cca", "fit", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--bogus"));
}

#[test]
fn mismatched_rows_exit_two_naming_both_files() {
    let dir = TempDir::new().unwrap();
    let x = dir.path().join("left.csv");
    let y = dir.path().join("right.csv");
    fs::write(&x, "1,2\n3,4\n5,6\n").unwrap();
    fs::write(&y, "1\n2\n").unwrap();
    let out = dir.path().join("o");
    let o = swicca(&["cca", "fit", "--x", p(&x), "--y", p(&y), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("left.csv") && msg.contains("right.csv"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn missing_and_malformed_files_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,x\n").unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("o");
    let o = swicca(&["cca", "fit", "--x", p(&bad), "--y", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv"));
    let o = swicca(&["cca", "fit", "--x", p(&missing), "--y", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn rank_deficient_fit_exits_three() {
    let dir = TempDir::new().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    // duplicated column
    fs::write(&x, "1,1\n2,2\n4,4\n3,3\n").unwrap();
    fs::write(&y, "1\n0\n2\n5\n").unwrap();
    let out = dir.path().join("o");
    let o = swicca(&["cca", "fit", "--x", p(&x), "--y", p(&y), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn cca_fit_matches_library() {
    let dir = TempDir::new().unwrap();
    let (x, y) = write_pair(dir.path(), 300, 4, 3);
    let xm = read_matrix(&x).unwrap();
    let ym = read_matrix(&y).unwrap();

    let full = dir.path().join("full");
    let o = swicca(&["cca", "fit", "--x", p(&x), "--y", p(&y), "--out", p(&full)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = fit_cca(&xm, &ym, &FitOptions::default()).unwrap();
    assert_eq!(read_matrix(&full.join("F.csv")).unwrap(), est.f);
    assert_eq!(read_matrix(&full.join("G.csv")).unwrap(), est.g);
    assert_eq!(read_matrix(&full.join("corrs.csv")).unwrap().col(0), est.corrs);

    let sc = dir.path().join("sc");
    let o = swicca(&[
        "cca", "fit", "--x", p(&x), "--y", p(&y), "--rank-x", "2", "--rank-y", "2", "--out", p(&sc),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = fit_icca_scalable(&xm, &ym, 2, 2, &FitOptions::default()).unwrap();
    assert_eq!(read_matrix(&sc.join("F.csv")).unwrap(), est.f);
}

#[test]
fn icca_without_ranks_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let (x, y) = write_pair(dir.path(), 20, 3, 3);
    let out = dir.path().join("o");
    let o = swicca(&["cca", "fit", "--x", p(&x), "--y", p(&y), "--method", "icca", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--rank-x"));
}

#[test]
fn swicca_stream_rows_and_truth_columns() {
    let dir = TempDir::new().unwrap();
    let (x, y) = write_pair(dir.path(), 80, 5, 4);
    let tf = dir.path().join("tf.csv");
    let tg = dir.path().join("tg.csv");
    fs::write(&tf, "1\n0\n0\n0\n0\n").unwrap();
    fs::write(&tg, "0\n1\n0\n0\n").unwrap();
    let out = dir.path().join("s.csv");
    let args = [
        "swicca", "stream", "--x", p(&x), "--y", p(&y), "--rank-x", "2", "--rank-y", "2", "--window", "20",
        "--backend", "isvd", "--corr", "empirical", "--truth-f", p(&tf), "--truth-g", p(&tg), "--seed", "3",
        "--out", p(&out),
    ];
    let o = swicca(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,corr_1,corr_2,f_affinity_1,g_affinity_1");
    assert_eq!(lines.len(), 81);
    assert!(lines[1].starts_with("1,nan"));
    let last: Vec<f64> = lines[80].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 80.0);
    assert!(last[1..].iter().all(|v| (0.0..=1.0).contains(v)), "{last:?}");
    // the shared latent is strong: the first direction should find it
    assert!(last[3] > 0.5 && last[4] > 0.5, "{last:?}");

    let out2 = dir.path().join("s2.csv");
    let mut args2 = args;
    *args2.last_mut().unwrap() = p(&out2);
    assert!(swicca(&args2).status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn swicca_stream_rejects_window_below_rank() {
    let dir = TempDir::new().unwrap();
    let (x, y) = write_pair(dir.path(), 10, 5, 4);
    let out = dir.path().join("s.csv");
    let o = swicca(&[
        "swicca", "stream", "--x", p(&x), "--y", p(&y), "--rank-x", "3", "--rank-y", "2", "--window", "2",
        "--loadings-window", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("max(r_x, r_y) <= w"), "{}", stderr(&o));
}

#[test]
fn genoja_stream_writes_one_row_per_update() {
    let dir = TempDir::new().unwrap();
    let (x, y) = write_pair(dir.path(), 30, 3, 2);
    let out = dir.path().join("g.csv");
    let o = swicca(&["genoja", "stream", "--x", p(&x), "--y", p(&y), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("t,step_change"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn sim_run_is_reproducible_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = swicca(&["sim", "run", "--regime", "nf-df", "--trials", "2", "--seed", "7", "--out", p(d)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["metrics.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let c = dir.path().join("c");
    let o = Command::new(env!("CARGO_BIN_EXE_swicca"))
        .args(["sim", "run", "--regime", "nf-df", "--trials", "2", "--seed", "7", "--out", p(&c)])
        .env("SWICCA_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let body = |d: &Path| {
        let t = fs::read_to_string(d.join("metrics.csv")).unwrap();
        t.lines().skip(1).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(body(&a), body(&c));
    assert_eq!(fs::read(a.join("summary.csv")).unwrap(), fs::read(c.join("summary.csv")).unwrap());
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,component,final_mean,final_sd,trials\n"));
    assert!(summary.contains("genoja_f_affinity,1,"));
}

#[test]
fn sim_run_rejects_unknown_regime_and_bad_threads() {
    let dir = TempDir::new().unwrap();
    let o = swicca(&["sim", "run", "--regime", "x-y", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--regime"));
    let o = Command::new(env!("CARGO_BIN_EXE_swicca"))
        .args(["sim", "run", "--regime", "nf-df", "--trials", "1", "--out", p(dir.path())])
        .env("SWICCA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SWICCA_THREADS"));
}

#[test]
fn sim_bench_layout() {
    let dir = TempDir::new().unwrap();
    let o = swicca(&["sim", "bench", "--dims", "16,32", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,method,mode,ns_per_update,state_bytes");
    assert_eq!(lines.len(), 7);
    let o = swicca(&["sim", "bench", "--dims", "32,16", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--dims"));
}

#[test]
fn diag_bounds_prints_key_values() {
    let o = swicca(&["diag", "bounds", "--seed", "4", "--eps", "1e-3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(text.starts_with("key,value\n"));
    let get = |k: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k},")))
            .unwrap_or_else(|| panic!("missing {k}"))
            .parse()
            .unwrap()
    };
    assert!(get("delta_W_F") <= get("delta_W_F_bound") + 1e-9);
    assert!(get("F_err").is_finite());
    assert_eq!(get("assumption_violated"), 0.0);
    assert_eq!(swicca(&["diag", "bounds", "--seed", "4", "--eps", "1e-3"]).stdout, o.stdout);

    let o = swicca(&["diag", "bounds", "--eps", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}
