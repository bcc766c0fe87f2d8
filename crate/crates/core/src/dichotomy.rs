//! Finite-time verdicts on spreading versus vanishing, bisection in μ,
//! front-speed estimates and checks against explicit upper solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{thresholds, upper_solution_construct, CoexistenceState, InitialData, ModelParams, Thresholds, UpperSolution};
use crate::numerics::least_squares_slope;
use crate::solver::{run_system, run_with, GridSpec, Logistic, RunOptions, SolutionState, Trajectory, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Spreading,
    Vanishing,
    Undecided,
}

/// The measurements behind a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evidence {
    pub t_final: f64,
    pub h_prime_final: f64,
    /// Smallest h′ over the tail window.
    pub tail_min_h_prime: f64,
    /// (h_final − h₀)/t_final.
    pub mean_speed: f64,
    /// e-folding time of the sup norm over the tail, capped at t_final.
    pub decay_time: f64,
    /// h′_final·decay_time, a proxy for the front growth still to come.
    pub projected_growth: f64,
    pub capital_lambda: f64,
    pub extended: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub h_final: f64,
    pub sup_final: f64,
    pub speed_estimate: Option<f64>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSettings {
    pub vanish_tol: f64,
    pub spread_factor: f64,
    /// Vanishing needs projected front growth below stall_tol·Λ.
    pub stall_tol: f64,
    /// Fraction of the run inspected for a stalled front.
    pub tail_fraction: f64,
    /// Spreading needs h′ on the tail above this fraction of the mean speed.
    pub stall_fraction: f64,
    /// Factor applied to t_end for the single retry of an undecided run.
    pub extend_factor: f64,
    /// Runs stop once h exceeds stop_factor·Λ, unless the whole horizon is wanted.
    pub stop_factor: f64,
    /// Fraction of the run used by the speed fit.
    pub speed_tail: f64,
    pub min_speed_duration: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            vanish_tol: 1e-3,
            spread_factor: 2.0,
            stall_tol: 1e-4,
            tail_fraction: 0.1,
            stall_fraction: 0.05,
            extend_factor: 4.0,
            stop_factor: 3.0,
            speed_tail: 0.5,
            min_speed_duration: 10.0,
        }
    }
}

impl ClassifierSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("classify.vanish_tol", self.vanish_tol),
            ("classify.stall_tol", self.stall_tol),
            ("classify.stall_fraction", self.stall_fraction),
            ("classify.min_speed_duration", self.min_speed_duration),
        ];
        for (key, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(LabError::config(key, format!("must be > 0, got {x}")));
            }
        }
        for (key, x) in [("classify.tail_fraction", self.tail_fraction), ("classify.speed_tail", self.speed_tail)] {
            if !(x > 0.0 && x <= 1.0) {
                return Err(LabError::config(key, format!("must lie in (0, 1], got {x}")));
            }
        }
        for (key, x) in [
            ("classify.spread_factor", self.spread_factor),
            ("classify.extend_factor", self.extend_factor),
            ("classify.stop_factor", self.stop_factor),
        ] {
            if !(x > 1.0 && x.is_finite()) {
                return Err(LabError::config(key, format!("must be > 1, got {x}")));
            }
        }
        if self.stop_factor <= self.spread_factor {
            return Err(LabError::config("classify.stop_factor", "must exceed spread_factor"));
        }
        Ok(())
    }
}

fn tail(records: &[TrajectoryRecord], fraction: f64) -> &[TrajectoryRecord] {
    let last = records.last().expect("non-empty trajectory");
    let t0 = last.t - fraction * (last.t - records[0].t);
    let start = records.partition_point(|r| r.t < t0).min(records.len() - 1);
    &records[start..]
}

fn sup_of(r: &TrajectoryRecord) -> f64 {
    r.u_max.max(r.v_max)
}

/// Classifies a finished trajectory.
pub fn classify(tr: &Trajectory, th: &Thresholds, cfg: &ClassifierSettings) -> Verdict {
    let first = &tr.records[0];
    let last = tr.last();
    let t_final = last.t;
    let lam = th.capital_lambda;
    let window = tail(&tr.records, cfg.tail_fraction);
    let tail_min_h_prime = window.iter().map(|r| r.h_prime).fold(f64::INFINITY, f64::min);
    let mean_speed = if t_final > first.t { (last.h - first.h) / (t_final - first.t) } else { 0.0 };

    let (s0, s1) = (sup_of(&window[0]), sup_of(last));
    let dt = last.t - window[0].t;
    let decay_time = if s1 > 0.0 && s0 > s1 && dt > 0.0 {
        (dt / (s0 / s1).ln()).min(t_final)
    } else {
        t_final
    };
    let projected_growth = last.h_prime * decay_time;
    let evidence = Evidence {
        t_final,
        h_prime_final: last.h_prime,
        tail_min_h_prime,
        mean_speed,
        decay_time,
        projected_growth,
        capital_lambda: lam,
        extended: false,
    };
    let sup_final = s1;
    let kind = if sup_final < cfg.vanish_tol && projected_growth < cfg.stall_tol * lam {
        VerdictKind::Vanishing
    } else if last.h > cfg.spread_factor * lam && mean_speed > 0.0 && tail_min_h_prime > cfg.stall_fraction * mean_speed {
        VerdictKind::Spreading
    } else {
        VerdictKind::Undecided
    };
    Verdict {
        kind,
        h_final: last.h,
        sup_final,
        speed_estimate: None,
        evidence,
    }
}

/// Stop rule for classification runs: the front is far past 2Λ, or the
/// densities are deep in the vanishing regime.
pub fn early_stop(th: &Thresholds, cfg: &ClassifierSettings) -> impl FnMut(&[TrajectoryRecord], &SolutionState) -> bool {
    let lam = th.capital_lambda;
    let stop_h = cfg.stop_factor * lam;
    let deep = 1e-3 * cfg.vanish_tol;
    let stall = cfg.stall_tol * lam;
    move |records, state| {
        let sup = state.sup(0).max(state.sup(1));
        state.h > stop_h || (sup < deep && state.h_prime * state.t.max(1.0) < stall && records.len() > 10)
    }
}

/// Runs to `g.t_end` (stopping early once the outcome is settled) and
/// classifies; an undecided run is repeated once with a longer horizon.
pub fn simulate_verdict(p: &ModelParams, init: &InitialData, g: &GridSpec, cfg: &ClassifierSettings) -> Result<(Verdict, Trajectory)> {
    let th = thresholds(p, init)?;
    let mut grid = *g;
    for attempt in 0..2 {
        let mut stop = early_stop(&th, cfg);
        let tr = run_with(p, init, &grid, &RunOptions::default(), &mut stop)?;
        let mut v = classify(&tr, &th, cfg);
        v.evidence.extended = attempt > 0;
        if v.kind != VerdictKind::Undecided || attempt == 1 {
            return Ok((v, tr));
        }
        grid = grid.with_t_end(grid.t_end * cfg.extend_factor);
    }
    unreachable!()
}

/// Report from [`check_spreading_limits`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitReport {
    pub applicable: bool,
    pub u_residual: f64,
    pub v_residual: f64,
    pub window: f64,
}

/// sup over x ∈ [0, window] of |u − u*| and |v − v*| at the final time.
pub fn check_spreading_limits(tr: &Trajectory, p: &ModelParams, eq: &CoexistenceState, window: f64) -> Result<LimitReport> {
    if !p.coexistence_regime() {
        return Ok(LimitReport {
            applicable: false,
            u_residual: f64::NAN,
            v_residual: f64::NAN,
            window,
        });
    }
    let s = &tr.final_state;
    if !(window > 0.0) || window > s.h {
        return Err(LabError::Precondition(format!("window {window} must lie in (0, h_final = {}]", s.h)));
    }
    let mut ru: f64 = 0.0;
    let mut rv: f64 = 0.0;
    for j in 0..=s.n() {
        if s.y(j) * s.h > window {
            break;
        }
        ru = ru.max((s.u()[j] - eq.u_star).abs());
        rv = rv.max((s.v()[j] - eq.v_star).abs());
    }
    Ok(LimitReport {
        applicable: true,
        u_residual: ru,
        v_residual: rv,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub mu: f64,
    pub kind: VerdictKind,
    pub h_final: f64,
    pub sup_final: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuBracket {
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Bracket ratio after seeding, before bisection.
    pub initial_ratio: f64,
    pub probes: Vec<Probe>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

const SEED_STEPS: usize = 40;

/// Geometric bisection on μ between a vanishing and a spreading seed.
/// Each iteration halves ln(mu_hi/mu_lo).
pub fn bracket_mu(p: &ModelParams, init: &InitialData, g: &GridSpec, iters: usize, cfg: &ClassifierSettings, delta: f64) -> Result<MuBracket> {
    let th = thresholds(p, init)?;
    if p.h0 >= th.capital_lambda {
        return Err(LabError::Precondition(format!(
            "h0 = {} must be below Lambda = {}",
            p.h0, th.capital_lambda
        )));
    }
    if iters < 4 {
        return Err(LabError::Precondition(format!("iters must be >= 4, got {iters}")));
    }
    let mut probes = Vec::new();
    let mut trajectories = Vec::new();
    let mut probe = |mu: f64| -> Result<VerdictKind> {
        let (v, tr) = simulate_verdict(&p.with_mu(mu), init, g, cfg)?;
        probes.push(Probe {
            mu,
            kind: v.kind,
            h_final: v.h_final,
            sup_final: v.sup_final,
            t_final: v.evidence.t_final,
        });
        trajectories.push(tr);
        if v.kind == VerdictKind::Undecided {
            return Err(LabError::Numerical(format!(
                "probe at mu = {mu} undecided after extension (h = {}, sup = {}, h' = {}, t = {})",
                v.h_final, v.sup_final, v.evidence.h_prime_final, v.evidence.t_final
            )));
        }
        Ok(v.kind)
    };

    let mut lo = match upper_solution_construct(p, init, delta) {
        Ok(up) => up.mu0,
        Err(_) => th.mu_zero.unwrap_or(1.0) * 0.5,
    };
    let mut seeded = false;
    for _ in 0..SEED_STEPS {
        if probe(lo)? == VerdictKind::Vanishing {
            seeded = true;
            break;
        }
        lo *= 0.5;
    }
    if !seeded {
        return Err(LabError::Numerical("no vanishing seed found by halving".into()));
    }
    let mut hi = th.mu_zero.unwrap_or(2.0 * lo).max(lo * 2.0);
    seeded = false;
    for _ in 0..SEED_STEPS {
        if probe(hi)? == VerdictKind::Spreading {
            seeded = true;
            break;
        }
        hi *= 2.0;
    }
    if !seeded {
        return Err(LabError::Numerical("no spreading seed found by doubling".into()));
    }
    let initial_ratio = hi / lo;
    for _ in 0..iters {
        let mid = (lo * hi).sqrt();
        match probe(mid)? {
            VerdictKind::Vanishing => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(MuBracket {
        mu_lo: lo,
        mu_hi: hi,
        initial_ratio,
        probes,
        trajectories,
    })
}

/// Least-squares slope of h against t over the final `speed_tail` of the run.
pub fn estimate_speed(tr: &Trajectory, cfg: &ClassifierSettings) -> Result<f64> {
    let duration = tr.duration();
    if duration < cfg.min_speed_duration {
        return Err(LabError::Precondition(format!(
            "trajectory covers {duration}, fewer than the {} needed for a speed fit",
            cfg.min_speed_duration
        )));
    }
    let window = tail(&tr.records, cfg.speed_tail);
    let t: Vec<f64> = window.iter().map(|r| r.t).collect();
    let h: Vec<f64> = window.iter().map(|r| r.h).collect();
    least_squares_slope(&t, &h).ok_or_else(|| LabError::Numerical("degenerate speed fit".into()))
}

/// Front coefficients of the four single-species comparison systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxCoefficients {
    pub kappa1: f64,
    pub kappa2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl AuxCoefficients {
    pub fn from_params(p: &ModelParams) -> Self {
        AuxCoefficients {
            kappa1: p.mu,
            kappa2: p.mu,
            tau1: p.mu * p.rho,
            tau2: p.mu * p.rho,
        }
    }
}

/// Tail speeds of the single-species systems; `None` marks a run that did
/// not spread (or a growth rate that is not positive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedBracket {
    pub s_upper_sys: Option<f64>,
    pub k_upper_sys: Option<f64>,
    pub s_lower_sys: Option<f64>,
    pub k_lower_sys: Option<f64>,
}

impl SpeedBracket {
    /// max of the lower-system speeds.
    pub fn lower(&self) -> Option<f64> {
        match (self.s_lower_sys, self.k_lower_sys) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
    /// min of the upper-system speeds.
    pub fn upper(&self) -> Option<f64> {
        match (self.s_upper_sys, self.k_upper_sys) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// The four comparison systems as (label, system, initial profile).
pub fn auxiliary_systems(p: &ModelParams, coef: &AuxCoefficients) -> [(&'static str, Logistic); 4] {
    [
        ("s_upper", Logistic { growth: p.lambda, diffusivity: 1.0, coefficient: coef.kappa1 }),
        ("k_upper", Logistic { growth: p.nu + p.c, diffusivity: p.d, coefficient: coef.tau1 }),
        ("s_lower", Logistic { growth: p.lambda - p.b / p.m, diffusivity: 1.0, coefficient: coef.kappa2 }),
        ("k_lower", Logistic { growth: p.nu, diffusivity: p.d, coefficient: coef.tau2 }),
    ]
}

/// Runs one logistic free-boundary problem to the end of the grid and
/// returns its tail speed, or `None` if it did not spread.
pub fn logistic_speed(sys: &Logistic, profile: &[f64], h0: f64, g: &GridSpec, cfg: &ClassifierSettings) -> Result<Option<f64>> {
    if !(sys.growth > 0.0) || profile.iter().all(|&x| x == 0.0) {
        return Ok(None);
    }
    let tr = run_system(sys, &[profile], h0, g, &RunOptions::default(), &mut |_, _| false)?;
    let critical = std::f64::consts::FRAC_PI_2 * (sys.diffusivity / sys.growth).sqrt();
    let last = tr.last();
    if last.h <= cfg.spread_factor * critical || last.u_max < cfg.vanish_tol {
        return Ok(None);
    }
    estimate_speed(&tr, cfg).map(Some)
}

pub fn speed_bracket(p: &ModelParams, init: &InitialData, g: &GridSpec, coef: &AuxCoefficients, cfg: &ClassifierSettings) -> Result<SpeedBracket> {
    let systems = auxiliary_systems(p, coef);
    let speeds: Vec<Option<f64>> = systems
        .par_iter()
        .enumerate()
        .map(|(i, (_, sys))| {
            let profile = if i % 2 == 0 { init.u0() } else { init.v0() };
            logistic_speed(sys, profile, p.h0, g, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(SpeedBracket {
        s_upper_sys: speeds[0],
        k_upper_sys: speeds[1],
        s_lower_sys: speeds[2],
        k_lower_sys: speeds[3],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub passed: bool,
    /// Largest excess of the solution over the upper solution (negative when strictly below).
    pub worst_violation: f64,
    pub tol: f64,
    pub checked_times: usize,
}

/// Checks u, v ≤ ū + tol and h ≤ σ + tol at each requested snapshot time.
pub fn verify_comparison(tr: &Trajectory, p: &ModelParams, construct: &UpperSolution, times: &[f64]) -> Result<ComparisonReport> {
    if p.mu > construct.mu0 {
        return Err(LabError::Precondition(format!(
            "mu = {} exceeds mu0 = {} of the upper solution; comparison does not apply",
            p.mu, construct.mu0
        )));
    }
    let tol = 1e-3 * construct.amplitude;
    let mut worst = f64::NEG_INFINITY;
    for &t in times {
        let snap = tr
            .snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| LabError::Precondition(format!("no snapshot at t = {t}")))?;
        worst = worst.max(snap.h - construct.sigma(t));
        let n = snap.n();
        for j in 0..=n {
            let x = j as f64 / n as f64 * snap.h;
            let bound = construct.value(t, x);
            worst = worst.max(snap.u()[j] - bound);
            if !snap.v().is_empty() {
                worst = worst.max(snap.v()[j] - bound);
            }
        }
    }
    Ok(ComparisonReport {
        passed: worst <= tol,
        worst_violation: worst,
        tol,
        checked_times: times.len(),
    })
}

/// One entry of a randomized dichotomy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepEntry {
    pub params: ModelParams,
    pub capital_lambda: f64,
    pub verdict: Verdict,
    pub min_density: f64,
    pub min_front_increment: f64,
    pub max_clamp: f64,
}

/// A regime-valid parameter set drawn from `rng`, with h₀ = frac·Λ.
pub fn random_regime_params<R: Rng>(rng: &mut R, h0_frac: (f64, f64)) -> ModelParams {
    let lambda = rng.gen_range(0.5..2.0);
    let m = rng.gen_range(0.5..2.0);
    let nu = rng.gen_range(0.5..2.0);
    let c = rng.gen_range(0.1..1.0);
    let d = rng.gen_range(0.5..2.0);
    let t: f64 = rng.gen_range(0.05..0.95);
    // mλ·c/(c+ν) < b < mλ is exactly the coexistence regime
    let b = m * lambda * (c + t * nu) / (c + nu);
    let mu = 10f64.powf(rng.gen_range(-2.0..1.0));
    let rho = rng.gen_range(0.5..2.0);
    let mut p = ModelParams { lambda, b, m, d, nu, c, mu, rho, h0: 1.0 };
    let lam = crate::model::prey_critical_length(&p).min(crate::model::predator_critical_length(&p));
    p.h0 = rng.gen_range(h0_frac.0..h0_frac.1) * lam;
    p
}

/// Classifies `count` random regime-valid runs in parallel; reproducible for a given seed.
pub fn sweep(seed: u64, count: usize, amp: (f64, f64), n_samples: usize, g: &GridSpec, cfg: &ClassifierSettings) -> Result<Vec<SweepEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<ModelParams> = (0..count).map(|_| random_regime_params(&mut rng, (0.3, 0.9))).collect();
    params
        .par_iter()
        .map(|p| {
            let init = InitialData::cosine(p.h0, amp.0, amp.1, n_samples)?;
            let (verdict, tr) = simulate_verdict(p, &init, g, cfg)?;
            Ok(SweepEntry {
                params: *p,
                capital_lambda: verdict.evidence.capital_lambda,
                verdict,
                min_density: tr.min_density,
                min_front_increment: tr.min_front_increment,
                max_clamp: tr.max_clamp,
            })
        })
        .collect()
}
