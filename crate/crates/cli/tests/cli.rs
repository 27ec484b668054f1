use std::path::{Path, PathBuf};

use mrsmnts_cli::dispatch;

/// Bundled sample: three assets and an `INDEX` column over 800 business days.
fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_prices.csv")
}

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("mrsmnts").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["risk", "--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["fit", "--index", "INDEX", "--out", "m.json"]), 2);
    assert_eq!(run(&["optimize", "--cube", "c", "--measure", "cvar", "--box", "0.1", "--out", "f.csv"]), 2);
    assert_eq!(run(&["nonsense"]), 2);
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let prices = sample();
    let out = dir.path().join("model.json");
    // unknown index column
    assert_eq!(run(&["fit", "--prices", s(&prices), "--index", "NOPE", "--out", s(&out)]), 1);
    // 799 returns are fewer than the default minimum
    assert_eq!(run(&["fit", "--prices", s(&prices), "--index", "INDEX", "--out", s(&out)]), 1);
    assert!(!out.exists());
}

#[test]
fn ingest_writes_returns_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("returns.csv");
    assert_eq!(run(&["ingest", "--prices", s(&sample()), "--columns", "ALPHA,GAMMA", "--out", s(&out)]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 800);
    assert!(text.starts_with("date,ALPHA,GAMMA\n2019-01-03,"));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("returns.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_simulate_risk_optimize_report_backtest() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| -> &'static str { Box::leak(dir.path().join(name).to_str().unwrap().to_owned().into_boxed_str()) };
    let prices = sample();
    let prices = s(&prices);

    let fit = [
        "fit", "--prices", prices, "--index", "INDEX", "--out", p("model.json"), "--regimes", "2", "--starts", "2", "--min-obs", "700",
        "--seed", "5", "--reports", p("fit_reports"),
    ];
    assert_eq!(run(&fit), 0);
    assert!(Path::new(p("model.json.manifest.json")).exists());
    for f in ["ks.csv", "transition.csv", "diagnostics.csv", "selection.csv"] {
        assert!(Path::new(p("fit_reports")).join(f).exists(), "{f}");
    }

    let sim = ["simulate", "--model", p("model.json"), "--paths", "200", "--seed", "9", "--out", p("cube.bin"), "--csv", p("cube.csv")];
    assert_eq!(run(&sim), 0);
    assert_eq!(run(&[&sim[..7], &["--out", p("cube2.bin")]].concat()), 0);
    assert_eq!(std::fs::read(p("cube.bin")).unwrap(), std::fs::read(p("cube2.bin")).unwrap());
    assert_eq!(std::fs::read_to_string(p("cube.csv")).unwrap().lines().count(), 1 + 200 * 10);
    assert!(std::fs::read_to_string(p("cube.csv")).unwrap().starts_with("path,period,regime,ALPHA,BETA,GAMMA\n"));

    std::fs::write(p("w.csv"), "asset,weight\nGAMMA,0.2\nALPHA,0.5\nBETA,0.3\n").unwrap();
    let risk = ["risk", "--cube", p("cube.bin"), "--weights", p("w.csv"), "--measure", "cdar", "--eta", "0.5", "--dd-out", p("dd.csv")];
    assert_eq!(run(&risk), 0);
    assert_eq!(std::fs::read_to_string(p("dd.csv")).unwrap().lines().count(), 1 + 200 * 10);
    assert_eq!(run(&["risk", "--cube", p("cube.bin"), "--weights", p("w.csv"), "--measure", "cvar"]), 1);

    let opt = [
        "optimize", "--cube", p("cube.bin"), "--measure", "cvar", "--eta", "0.9", "--floors", "-0.02,-0.01,0,0.002,0.004", "--box",
        "0.05:0.8", "--out", p("frontier.csv"),
    ];
    assert_eq!(run(&opt), 0);
    let front = std::fs::read_to_string(p("frontier.csv")).unwrap();
    assert_eq!(front.lines().count(), 6);

    assert_eq!(run(&["report", "--model", p("model.json"), "--outdir", p("reports")]), 0);
    for f in ["ks.csv", "transition.csv", "diagnostics.csv", "selection.csv"] {
        assert_eq!(std::fs::read(Path::new(p("reports")).join(f)).unwrap(), std::fs::read(Path::new(p("fit_reports")).join(f)).unwrap(), "{f}");
    }

    std::fs::write(
        p("bt.toml"),
        r#"window = 779
paths = 100
floors = [-0.01, -0.002, 0.0, 0.001, 0.002, 0.004]
measures = [{ kind = "cvar", eta = 0.5 }, { kind = "variance" }]
bounds = { lo = 0.05, hi = 0.8 }

[fit]
regimes = 2
starts = 2
"#,
    )
    .unwrap();
    let bt = ["backtest", "--config", p("bt.toml"), "--prices", prices, "--index", "INDEX", "--outdir", p("bt")];
    assert_eq!(run(&bt), 0);
    for f in ["performance.csv", "suboptimal.csv", "wealth.csv", "drawdown.csv", "returns.csv", "weights.csv", "rebalances.csv", "manifest.json"] {
        assert!(Path::new(p("bt")).join(f).exists(), "{f}");
    }
    let perf = std::fs::read_to_string(Path::new(p("bt")).join("performance.csv")).unwrap();
    assert!(perf.lines().any(|l| l.starts_with("INDEX,")));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(Path::new(p("bt")).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 7);
}
