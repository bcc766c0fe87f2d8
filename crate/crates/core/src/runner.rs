//! Experiment dispatch: runs the configured kind and writes its files.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ExperimentKind, ParsedConfig};
use crate::dichotomy::{bracket_mu, classify, estimate_speed, speed_bracket, sweep, AuxCoefficients, VerdictKind};
use crate::error::{LabError, Result};
use crate::model::{coexistence_state, thresholds, upper_solution_construct, Thresholds};
use crate::output::{write_csv, write_json, PHASEPLANE_COLUMNS, PROFILE_COLUMNS, TRAJECTORY_COLUMNS, WAVE_COLUMNS};
use crate::phase_plane::{eta_star, finite_wave, q_eta, traveling_wave, z_eta, z_star, FrontProfile, Nonlinearity, WaveNonlinearity};
use crate::solver::{run_with, Snapshot, Trajectory};

/// Flags for the places where the implementation departs from a literal
/// reading of the model's published formulas.
#[derive(Debug, Clone, Serialize)]
pub struct Errata {
    /// Auxiliary front laws use −κ·∂ₓφ at the front, not the value of φ.
    pub auxiliary_front_law_gradient: bool,
    /// Predator auxiliary systems keep the diffusivity d.
    pub auxiliary_predator_diffusivity: bool,
    /// The upper solution's decay rate carries min{1, d}.
    pub upper_solution_min_diffusivity: bool,
}

const ERRATA: Errata = Errata {
    auxiliary_front_law_gradient: true,
    auxiliary_predator_diffusivity: true,
    upper_solution_min_diffusivity: true,
};

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    kind: &'a str,
    config: &'a ExperimentConfig,
    defaulted_keys: &'a [String],
    errata: Errata,
    notes: Vec<&'static str>,
}

/// What a dispatch produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// The verdict record shared by simulate, speed and sweep-mu.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub kind: Option<VerdictKind>,
    pub h_final: Option<f64>,
    pub sup_final: Option<f64>,
    pub speed_estimate: Option<f64>,
    pub mu_lo: Option<f64>,
    pub mu_hi: Option<f64>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, value)
    }
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, header, rows)
    }
    fn trajectory(&mut self, name: &str, tr: &Trajectory) -> Result<()> {
        self.csv(
            name,
            &TRAJECTORY_COLUMNS,
            tr.records.iter().map(|r| vec![r.t, r.h, r.h_prime, r.u_max, r.v_max]),
        )
    }
    fn profile(&mut self, name: &str, snap: &Snapshot) -> Result<()> {
        let n = snap.n();
        let v = snap.v();
        self.csv(
            name,
            &PROFILE_COLUMNS,
            (0..=n).map(|j| {
                let y = j as f64 / n as f64;
                vec![y, y * snap.h, snap.u()[j], v.get(j).copied().unwrap_or(0.0)]
            }),
        )
    }
    fn wave(&mut self, name: &str, z: &[f64], q: &[f64], p: &[f64]) -> Result<()> {
        self.csv(name, &WAVE_COLUMNS, (0..z.len()).map(|i| vec![z[i], q[i], p[i]]))
    }
}

fn notes(kind: ExperimentKind) -> Vec<&'static str> {
    let mut v = vec!["initial data: cosine family a*cos(pi x/(2 h0)) is a default choice, not part of the model"];
    if matches!(kind, ExperimentKind::Phaseplane | ExperimentKind::Wave) {
        v.push("wave nonlinearity: prey density frozen at the coexistence value u*");
    }
    if kind == ExperimentKind::Wave {
        v.push("traveling fronts are cut where q < 1e-10 and pinned to q(0) = 0");
    }
    v
}

fn final_snapshot(tr: &Trajectory) -> Snapshot {
    let s = &tr.final_state;
    Snapshot {
        t: s.t,
        h: s.h,
        profiles: s.profiles.clone(),
    }
}

fn speed_or_none(tr: &Trajectory, cfg: &ExperimentConfig, kind: VerdictKind) -> Option<f64> {
    (kind == VerdictKind::Spreading).then(|| estimate_speed(tr, &cfg.classify).ok()).flatten()
}

fn full_run(cfg: &ExperimentConfig, th: &Thresholds, w: &mut Writer) -> Result<(Trajectory, VerdictRecord)> {
    let init = cfg.initial_data()?;
    let tr = run_with(&cfg.model, &init, &cfg.grid_spec(), &cfg.run_options(), &mut |_, _| false)?;
    let mut v = classify(&tr, th, &cfg.classify);
    v.speed_estimate = speed_or_none(&tr, cfg, v.kind);
    w.trajectory("trajectory.csv", &tr)?;
    for (i, snap) in tr.snapshots.iter().enumerate() {
        w.profile(&format!("profile_{i:03}.csv"), snap)?;
    }
    w.profile("profile_final.csv", &final_snapshot(&tr))?;
    let rec = VerdictRecord {
        kind: Some(v.kind),
        h_final: Some(v.h_final),
        sup_final: Some(v.sup_final),
        speed_estimate: v.speed_estimate,
        mu_lo: None,
        mu_hi: None,
    };
    w.json("verdict.json", &rec)?;
    Ok((tr, rec))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| format!("{v:.6}"))
}

/// Runs the configured experiment, writing metadata and results into `run.out_dir`.
pub fn dispatch(parsed: &ParsedConfig) -> Result<Outcome> {
    let cfg = &parsed.config;
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.run.out_dir);
    fs::create_dir_all(&dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    let mut w = Writer { dir, files: Vec::new() };
    let kind = cfg.run.kind;
    w.json(
        "metadata.json",
        &Metadata {
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.name(),
            config: cfg,
            defaulted_keys: &parsed.defaulted,
            errata: ERRATA,
            notes: notes(kind),
        },
    )?;
    let p = &cfg.model;
    let summary = match kind {
        ExperimentKind::Thresholds => {
            let th = thresholds(p, &cfg.initial_data()?)?;
            w.json("thresholds.json", &th)?;
            if let Ok(eq) = coexistence_state(p) {
                w.json("coexistence.json", &eq)?;
            }
            if let Ok(up) = upper_solution_construct(p, &cfg.initial_data()?, cfg.run.delta) {
                w.json("upper_solution.json", &up)?;
            }
            format!(
                "thresholds: Lambda = {:.6}, Z* = {:.6}, mu0 = {}, speed bound = {:.6}",
                th.capital_lambda,
                th.z_star,
                fmt_opt(th.mu_zero),
                th.speed_upper
            )
        }
        ExperimentKind::Simulate => {
            let th = thresholds(p, &cfg.initial_data()?)?;
            let (tr, rec) = full_run(cfg, &th, &mut w)?;
            format!(
                "simulate: {:?} at t = {:.3}, h = {:.6}, sup = {:.3e}, speed = {}",
                rec.kind.unwrap(),
                tr.last().t,
                tr.last().h,
                rec.sup_final.unwrap(),
                fmt_opt(rec.speed_estimate)
            )
        }
        ExperimentKind::Speed => {
            let init = cfg.initial_data()?;
            let th = thresholds(p, &init)?;
            let (_, rec) = full_run(cfg, &th, &mut w)?;
            let br = speed_bracket(p, &init, &cfg.grid_spec(), &AuxCoefficients::from_params(p), &cfg.classify)?;
            #[derive(Serialize)]
            struct SpeedRecord {
                speed_estimate: Option<f64>,
                speed_upper: f64,
                s_upper_sys: Option<f64>,
                k_upper_sys: Option<f64>,
                s_lower_sys: Option<f64>,
                k_lower_sys: Option<f64>,
            }
            w.json(
                "speed.json",
                &SpeedRecord {
                    speed_estimate: rec.speed_estimate,
                    speed_upper: th.speed_upper,
                    s_upper_sys: br.s_upper_sys,
                    k_upper_sys: br.k_upper_sys,
                    s_lower_sys: br.s_lower_sys,
                    k_lower_sys: br.k_lower_sys,
                },
            )?;
            format!(
                "speed: estimate {} (bound {:.6}), auxiliary lower {} upper {}",
                fmt_opt(rec.speed_estimate),
                th.speed_upper,
                fmt_opt(br.lower()),
                fmt_opt(br.upper())
            )
        }
        ExperimentKind::SweepMu => {
            let init = cfg.initial_data()?;
            let b = bracket_mu(p, &init, &cfg.grid_spec(), cfg.run.iters, &cfg.classify, cfg.run.delta)?;
            w.json(
                "bracket.json",
                &VerdictRecord {
                    kind: None,
                    h_final: None,
                    sup_final: None,
                    speed_estimate: None,
                    mu_lo: Some(b.mu_lo),
                    mu_hi: Some(b.mu_hi),
                },
            )?;
            w.json("probes.json", &b.probes)?;
            for (i, tr) in b.trajectories.iter().enumerate() {
                w.trajectory(&format!("probe_{i:03}.csv"), tr)?;
            }
            format!("sweep-mu: transition in [{:.9}, {:.9}] after {} probes", b.mu_lo, b.mu_hi, b.probes.len())
        }
        ExperimentKind::Phaseplane => {
            let wn = WaveNonlinearity::at_coexistence(p)?;
            let es = eta_star(&wn)?;
            let mut rows = Vec::new();
            for k in 1..=cfg.run.eta_points {
                let eta = es * 2f64.powi(-(k as i32));
                rows.push(vec![eta, q_eta(&wn, eta)?, z_eta(&wn, eta)?]);
            }
            #[derive(Serialize)]
            struct PhaseSummary {
                eta_star: f64,
                z_star: f64,
                theta: f64,
                u_fixed: f64,
            }
            w.json(
                "phaseplane.json",
                &PhaseSummary {
                    eta_star: es,
                    z_star: z_star(&wn),
                    theta: wn.theta(),
                    u_fixed: wn.u_fixed,
                },
            )?;
            let last = rows.last().unwrap().clone();
            w.csv("phaseplane.csv", &PHASEPLANE_COLUMNS, rows)?;
            format!(
                "phaseplane: eta* = {es:.6}, Z* = {:.6}, smallest eta gives z = {:.6}",
                z_star(&wn),
                last[2]
            )
        }
        ExperimentKind::Wave => {
            let s = cfg.run.wave_speed_factor * crate::model::speed_upper_bound(p);
            let pair = traveling_wave(p, s)?;
            let front = |w: &mut Writer, name: &str, f: &FrontProfile| w.wave(name, &f.z, &f.q, &f.p);
            front(&mut w, "wave_phi.csv", &pair.phi)?;
            front(&mut w, "wave_psi.csv", &pair.psi)?;
            let wn = WaveNonlinearity::at_coexistence(p)?;
            let eta = cfg.run.eta_fraction * eta_star(&wn)?;
            let fw = finite_wave(&wn, cfg.run.finite_wave_speed, eta)?;
            w.wave("finite_wave.csv", &fw.z, &fw.q, &fw.p)?;
            format!(
                "wave: s = {s:.6}, phi -> {:.6}, psi -> {:.6}; finite wave ends at z = {:.6}, q = {:.6}",
                pair.phi.terminal(),
                pair.psi.terminal(),
                fw.z_end,
                fw.q_end
            )
        }
        ExperimentKind::Sweep => {
            let entries = sweep(
                cfg.run.seed,
                cfg.run.sweep_count,
                (cfg.init.amp_u, cfg.init.amp_v),
                cfg.init.n_samples,
                &cfg.grid_spec(),
                &cfg.classify,
            )?;
            w.json("sweep.json", &entries)?;
            let count = |k| entries.iter().filter(|e| e.verdict.kind == k).count();
            format!(
                "sweep: {} runs, {} spreading, {} vanishing, {} undecided",
                entries.len(),
                count(VerdictKind::Spreading),
                count(VerdictKind::Vanishing),
                count(VerdictKind::Undecided)
            )
        }
    };
    Ok(Outcome { summary, files: w.files })
}

/// Writes a machine-readable error record next to the other outputs.
pub fn write_error(dir: &Path, err: &LabError) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct ErrorRecord<'a> {
        error: &'a str,
        message: String,
    }
    fs::create_dir_all(dir).map_err(|e| LabError::Io(e.to_string()))?;
    let path = dir.join("error.json");
    write_json(
        &path,
        &ErrorRecord {
            error: err.kind(),
            message: err.to_string(),
        },
    )?;
    Ok(path)
}

/// Process exit status for an error: 1 for usage and configuration problems, 2 for numerical failures.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Config { .. } | LabError::Io(_) | LabError::Precondition(_) => 1,
        _ => 2,
    }
}
