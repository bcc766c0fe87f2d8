use proptest::prelude::*;
use std::fs;
use std::path::Path;
use std::process::Command;

use stefan_lab::config::*;
use stefan_lab::dichotomy::ClassifierSettings;
use stefan_lab::model::ModelParams;

const BIN: &str = env!("CARGO_BIN_EXE_stefan-lab");

const REFERENCE: &str = "[model]
lambda = 1.0
b = 0.5
m = 1.0
d = 1.0
nu = 1.0
c = 0.5
mu = 6.25
rho = 1.0
h0 = 0.641274915080932

[grid]
t_end = 20.0
snapshot_times = [5.0]
";

fn stefan_lab(dir: &Path, config: &str, args: &[&str]) -> (i32, String, String) {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    let out = Command::new(BIN).arg(&path).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn thresholds_kind_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = stefan_lab(dir.path(), REFERENCE, &["--kind", "thresholds", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&read(out.join("thresholds.json"))).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["capital_lambda", "mu_star", "mu_star_star", "mu_zero", "speed_upper", "z_star"]);
    assert!((v["capital_lambda"].as_f64().unwrap() - 1.2825498301618641).abs() < 1e-12);
    let meta: serde_json::Value = serde_json::from_str(&read(out.join("metadata.json"))).unwrap();
    assert_eq!(meta["kind"], "thresholds");
    assert_eq!(meta["config"]["model"]["mu"].as_f64(), Some(6.25));
    assert!(meta["defaulted_keys"].as_array().unwrap().iter().any(|k| k == "grid.n"));
    assert_eq!(meta["errata"]["auxiliary_predator_diffusivity"], true);
}

#[test]
fn simulate_outputs_have_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (code, _, stderr) = stefan_lab(dir.path(), REFERENCE, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(read(out.join("trajectory.csv")).starts_with("t,h,h_prime,u_max,v_max\n"));
    assert!(read(out.join("profile_000.csv")).starts_with("y,x,u,v\n"));
    assert!(read(out.join("profile_final.csv")).starts_with("y,x,u,v\n"));
    let v: serde_json::Value = serde_json::from_str(&read(out.join("verdict.json"))).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["h_final", "kind", "mu_hi", "mu_lo", "speed_estimate", "sup_final"]);
    assert_eq!(v["kind"], "spreading");
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["simulate", "sweep"] {
        let out = dir.path().join(kind);
        let kept = dir.path().join(format!("{kind}_first"));
        let cfg = format!("{REFERENCE}\n[run]\nsweep_count = 4\n");
        for pass in 0..2 {
            let (code, _, stderr) = stefan_lab(dir.path(), &cfg, &["--kind", kind, "--seed", "11", "--out", out.to_str().unwrap()]);
            assert_eq!(code, 0, "{stderr}");
            if pass == 0 {
                fs::rename(&out, &kept).unwrap();
            }
        }
        let mut names: Vec<_> = fs::read_dir(&kept).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() > 1);
        for name in names {
            assert!(read(kept.join(&name)) == read(out.join(&name)), "{name:?} differs");
        }
    }
}

#[test]
fn phaseplane_rows_approach_z_star() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pp");
    let (code, _, _) = stefan_lab(dir.path(), REFERENCE, &["--kind", "phaseplane", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = read(out.join("phaseplane.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,q_eta,z_eta"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 12);
    let z_star = std::f64::consts::FRAC_PI_2 * (2.0f64 / 3.0).sqrt();
    let last = rows.last().unwrap();
    assert!(last[0] < 1e-3 && last[1] < 1e-3 && (last[2] - z_star).abs() < 1e-3 * z_star);
    assert!(rows.windows(2).all(|w| w[1][0] < w[0][0] && w[1][1] < w[0][1]));
}

#[test]
fn wave_and_bracket_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wave");
    let (code, _, _) = stefan_lab(dir.path(), REFERENCE, &["--kind", "wave", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    for f in ["wave_phi.csv", "wave_psi.csv", "finite_wave.csv"] {
        assert!(read(out.join(f)).starts_with("z,q,p\n"));
    }
    let out = dir.path().join("bracket");
    let cfg = REFERENCE.replace("t_end = 20.0", "t_end = 200.0");
    let (code, _, stderr) = stefan_lab(dir.path(), &cfg, &["--kind", "sweep-mu", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(&read(out.join("bracket.json"))).unwrap();
    assert!(v["mu_lo"].as_f64().unwrap() < v["mu_hi"].as_f64().unwrap());
    assert!(out.join("probe_000.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let (code, _, _) = stefan_lab(dir.path(), REFERENCE, &["--kind", "bogus"]);
    assert_eq!(code, 1);
    let (code, _, stderr) = stefan_lab(dir.path(), &REFERENCE.replace("lambda = 1.0", "lamda = 1.0"), &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("lamda"));
    let (code, _, stderr) = stefan_lab(dir.path(), &REFERENCE.replace("lambda = 1.0", "lambda = -1.0"), &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("lambda"));
    let missing = Command::new(BIN).arg(dir.path().join("nope.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let help = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail");
    let cfg = REFERENCE.replace("t_end = 20.0", "t_end = 500.0\ndt = 50.0");
    let (code, _, _) = stefan_lab(dir.path(), &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(&read(out.join("error.json"))).unwrap();
    assert_eq!(v["error"], "solver");
}

#[test]
fn minimal_document_parses_with_defaults() {
    let doc = "[model]\nlambda = 1.0\nb = 0.5\nm = 1.0\nd = 1.0\nnu = 1.0\nc = 0.5\nmu = 1.0\nrho = 1.0\nh0 = 0.5\n[run]\nkind = \"thresholds\"\n";
    let parsed = parse_config(doc).unwrap();
    assert_eq!(parsed.config.classify, ClassifierSettings::default());
    assert_eq!(parsed.config.init, InitSettings::default());
    assert!(parsed.defaulted.len() > 10);
}

prop_compose! {
    fn arb_config()(
        vals in proptest::collection::vec(0.01f64..100.0, 9),
        n in 16usize..2000,
        dt in 1e-5f64..0.1,
        t_end in 0.5f64..1e4,
        snaps in proptest::collection::vec(0.0f64..100.0, 0..4),
        record in proptest::option::of(1e-3f64..10.0),
        seed in 0..=i64::MAX as u64,
        kind in 0usize..7,
        amp in 0.01f64..3.0,
        iters in 4usize..30,
    ) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelParams {
                lambda: vals[0], b: vals[1], m: vals[2], d: vals[3], nu: vals[4],
                c: vals[5], mu: vals[6], rho: vals[7], h0: vals[8],
            },
            init: InitSettings { amp_u: amp, n_samples: 3 + n, ..InitSettings::default() },
            grid: GridSettings { n, dt, t_end, dt_safety: 0.5, record_interval: record, snapshot_times: snaps },
            classify: ClassifierSettings { vanish_tol: dt, ..ClassifierSettings::default() },
            run: RunSettings { kind: ExperimentKind::ALL[kind], seed, iters, out_dir: format!("out/{seed}"), ..RunSettings::default() },
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn emit_then_parse_is_identity(cfg in arb_config()) {
        let text = emit_config(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back.config, cfg);
    }
}
