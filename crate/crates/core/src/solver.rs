//! Front-fixing finite differences for the free-boundary system.
//!
//! With y = x/h(t) the habitat becomes [0, 1] and each species obeys
//! w_t = D w_yy / h² + (y h'/h) w_y + R(w), with w_y(0) = 0, w(1) = 0 and
//! h' = −Σ_k κ_k w_{k,y}(1)/h. Diffusion is implicit (one tridiagonal solve
//! per species), advection and reaction are explicit, and h' is lagged.
//! Advection is centred unless the cell Péclet number exceeds 2, where it
//! switches to the upwind (y + Δy) difference.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{predator_rate, prey_rate, InitialData, ModelParams};
use crate::numerics::tridiag;

/// Values in `[-SILENT_CLAMP, 0)` are roundoff and are zeroed without comment.
pub const SILENT_CLAMP: f64 = 1e-12;
/// Anything below `-HARD_CLAMP` is treated as an instability.
pub const HARD_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of intervals on y ∈ [0, 1]; nodes are y_j = j/n.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// A step is halved while h'·dt > dt_safety·h·Δy.
    pub dt_safety: f64,
}

impl GridSpec {
    pub fn new(n: usize, dt: f64, t_end: f64) -> Self {
        GridSpec {
            n,
            dt,
            t_end,
            dt_safety: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(LabError::config("grid.n", format!("must be >= 16, got {}", self.n)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LabError::config("grid.dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LabError::config("grid.t_end", format!("must be > 0, got {}", self.t_end)));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(LabError::config("grid.dt_safety", format!("must lie in (0, 1], got {}", self.dt_safety)));
        }
        Ok(())
    }

    pub fn dy(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }
}

/// Species sharing one free boundary.
pub trait FrontSystem: Sync {
    fn n_species(&self) -> usize;
    fn diffusivity(&self, k: usize) -> f64;
    /// κ_k in h' = −Σ κ_k ∂_x w_k at the front.
    fn front_coefficient(&self, k: usize) -> f64;
    fn reactions(&self, values: &[f64], rates: &mut [f64]);
}

/// The two-species system: prey with unit diffusivity, predator with d;
/// the front is driven by μ(u_x + ρ v_x).
#[derive(Debug, Clone, Copy)]
pub struct PredatorPrey(pub ModelParams);

impl FrontSystem for PredatorPrey {
    fn n_species(&self) -> usize {
        2
    }
    fn diffusivity(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.0.d
        }
    }
    fn front_coefficient(&self, k: usize) -> f64 {
        if k == 0 {
            self.0.mu
        } else {
            self.0.mu * self.0.rho
        }
    }
    #[inline]
    fn reactions(&self, values: &[f64], rates: &mut [f64]) {
        rates[0] = prey_rate(values[0], values[1], &self.0);
        rates[1] = predator_rate(values[0], values[1], &self.0);
    }
}

/// A single logistic species w_t − D w_xx = g w − w² with front law h' = −κ w_x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Logistic {
    pub growth: f64,
    pub diffusivity: f64,
    pub coefficient: f64,
}

impl FrontSystem for Logistic {
    fn n_species(&self) -> usize {
        1
    }
    fn diffusivity(&self, _k: usize) -> f64 {
        self.diffusivity
    }
    fn front_coefficient(&self, _k: usize) -> f64 {
        self.coefficient
    }
    #[inline]
    fn reactions(&self, values: &[f64], rates: &mut [f64]) {
        let w = values[0];
        rates[0] = self.growth * w - w * w;
    }
}

/// Time, front, front speed and the profiles on the nodes y_j = j/n.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub h: f64,
    pub h_prime: f64,
    pub profiles: Vec<Vec<f64>>,
}

impl SolutionState {
    /// Number of intervals of the normalized grid.
    pub fn n(&self) -> usize {
        self.profiles[0].len() - 1
    }
    pub fn dy(&self) -> f64 {
        1.0 / self.n() as f64
    }
    pub fn u(&self) -> &[f64] {
        &self.profiles[0]
    }
    /// Predator profile; empty for single-species states.
    pub fn v(&self) -> &[f64] {
        self.profiles.get(1).map(Vec::as_slice).unwrap_or(&[])
    }
    pub fn sup(&self, k: usize) -> f64 {
        self.profiles.get(k).map_or(0.0, |w| w.iter().cloned().fold(0.0, f64::max))
    }
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }
}

/// Second-order one-sided x-derivative at the front of a profile that vanishes there.
pub fn front_gradient(w: &[f64], h: f64) -> f64 {
    let n = w.len() - 1;
    let dy = 1.0 / n as f64;
    (3.0 * w[n] - 4.0 * w[n - 1] + w[n - 2]) / (2.0 * dy * h)
}

/// (u_x, v_x) at x = h(t). The predator entry is 0 for single-species states.
pub fn boundary_gradient(state: &SolutionState) -> (f64, f64) {
    let gu = front_gradient(state.u(), state.h);
    let gv = if state.v().is_empty() { 0.0 } else { front_gradient(state.v(), state.h) };
    (gu, gv)
}

/// Front speed from the front law; negative values (possible only through
/// roundoff on a degenerate profile) are cut to zero.
pub fn front_speed<S: FrontSystem + ?Sized>(sys: &S, profiles: &[Vec<f64>], h: f64) -> f64 {
    let drive: f64 = profiles
        .iter()
        .enumerate()
        .map(|(k, w)| sys.front_coefficient(k) * front_gradient(w, h))
        .sum();
    (-drive).max(0.0)
}

/// Interpolates sampled profiles on [0, h₀] onto the normalized grid.
pub fn initial_state<S: FrontSystem + ?Sized>(sys: &S, samples: &[&[f64]], h0: f64, n: usize) -> Result<SolutionState> {
    if samples.len() != sys.n_species() {
        return Err(LabError::Precondition(format!(
            "system has {} species but {} initial profiles were given",
            sys.n_species(),
            samples.len()
        )));
    }
    let profiles: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut w: Vec<f64> = (0..=n)
                .map(|j| InitialData::interpolate(s, h0, j as f64 / n as f64 * h0).max(0.0))
                .collect();
            w[n] = 0.0;
            w
        })
        .collect();
    let h_prime = front_speed(sys, &profiles, h0);
    Ok(SolutionState {
        t: 0.0,
        h: h0,
        h_prime,
        profiles,
    })
}

/// Outcome of one step, with the largest clamped magnitude.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SolutionState,
    pub clamped: f64,
}

/// One semi-implicit step of size `dt` for an arbitrary front system.
pub fn step_system<S: FrontSystem + ?Sized>(sys: &S, state: &SolutionState, dt: f64) -> Result<StepOutcome> {
    let n = state.n();
    let dy = state.dy();
    let ns = sys.n_species();
    let h = state.h;
    let hp = state.h_prime;
    let h_new = h + dt * hp;

    let mut rates = vec![vec![0.0; n]; ns];
    let mut vals = vec![0.0; ns];
    let mut out = vec![0.0; ns];
    for j in 0..n {
        for k in 0..ns {
            vals[k] = state.profiles[k][j];
        }
        sys.reactions(&vals, &mut out);
        for k in 0..ns {
            rates[k][j] = out[k];
        }
    }

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut profiles = Vec::with_capacity(ns);
    let mut clamped: f64 = 0.0;
    for k in 0..ns {
        let w = &state.profiles[k];
        let r = dt * sys.diffusivity(k) / (h_new * h_new * dy * dy);
        let mut rhs = vec![0.0; n];
        rhs[0] = w[0] + dt * rates[k][0];
        diag[0] = 1.0 + 2.0 * r;
        upper[0] = -2.0 * r;
        // cell Péclet number a·Δy·h²/D above which central differences lose positivity
        let pe_scale = dy * h * h / sys.diffusivity(k);
        for j in 1..n {
            let a = (j as f64 * dy) * hp / h;
            let adv = if a * pe_scale <= 2.0 {
                a * (w[j + 1] - w[j - 1]) / (2.0 * dy)
            } else {
                a * (w[j + 1] - w[j]) / dy
            };
            rhs[j] = w[j] + dt * (adv + rates[k][j]);
            lower[j] = -r;
            diag[j] = 1.0 + 2.0 * r;
            upper[j] = -r;
        }
        tridiag::solve_in_place(&lower, &mut diag, &upper, &mut rhs)
            .map_err(|e| LabError::SolverFailure { t: state.t, message: e.to_string() })?;
        rhs.push(0.0);
        for x in rhs.iter_mut() {
            if *x < 0.0 {
                if *x < -HARD_CLAMP || !x.is_finite() {
                    return Err(LabError::SolverFailure {
                        t: state.t + dt,
                        message: format!("density {x:e} below -{HARD_CLAMP:e}; reduce dt"),
                    });
                }
                if *x < -SILENT_CLAMP {
                    clamped = clamped.max(-*x);
                }
                *x = 0.0;
            } else if !x.is_finite() {
                return Err(LabError::SolverFailure {
                    t: state.t + dt,
                    message: "non-finite density".into(),
                });
            }
        }
        profiles.push(rhs);
    }
    let h_prime = front_speed(sys, &profiles, h_new);
    Ok(StepOutcome {
        state: SolutionState {
            t: state.t + dt,
            h: h_new,
            h_prime,
            profiles,
        },
        clamped,
    })
}

/// One step of the predator-prey system with the grid's nominal `dt`.
pub fn step(state: &SolutionState, p: &ModelParams, g: &GridSpec) -> Result<SolutionState> {
    Ok(step_system(&PredatorPrey(*p), state, g.dt)?.state)
}

/// Per-record summary of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub h: f64,
    pub h_prime: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl TrajectoryRecord {
    fn of(state: &SolutionState) -> Self {
        TrajectoryRecord {
            t: state.t,
            h: state.h,
            h_prime: state.h_prime,
            u_max: state.sup(0),
            v_max: state.sup(1),
        }
    }
}

/// Full profiles at a requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub h: f64,
    pub profiles: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn u(&self) -> &[f64] {
        &self.profiles[0]
    }
    pub fn v(&self) -> &[f64] {
        self.profiles.get(1).map(Vec::as_slice).unwrap_or(&[])
    }
    pub fn n(&self) -> usize {
        self.profiles[0].len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SolutionState,
    /// The horizon the run was configured for.
    pub t_end: f64,
    /// Largest negative magnitude that was clamped to zero (beyond roundoff).
    pub max_clamp: f64,
    /// Smallest front increment over a step; negative would mean retreat.
    pub min_front_increment: f64,
    /// Smallest density seen in any recorded state after clamping.
    pub min_density: f64,
    pub steps: usize,
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("trajectory always has its initial record")
    }
    pub fn duration(&self) -> f64 {
        self.last().t - self.records[0].t
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Spacing of the summary records in time; `None` picks t_end/2000 (at least dt).
    pub record_interval: Option<f64>,
    /// Times at which full profiles are kept; the step is shortened to land on them.
    pub snapshot_times: Vec<f64>,
}

/// Termination hook called after every record; returning `true` stops the run.
pub type StopFn<'a> = dyn FnMut(&[TrajectoryRecord], &SolutionState) -> bool + 'a;

/// Integrates any front system from sampled initial profiles.
pub fn run_system<S: FrontSystem + ?Sized>(
    sys: &S,
    samples: &[&[f64]],
    h0: f64,
    g: &GridSpec,
    opts: &RunOptions,
    stop: &mut StopFn<'_>,
) -> Result<Trajectory> {
    g.validate()?;
    let mut state = initial_state(sys, samples, h0, g.n)?;
    let record_interval = opts.record_interval.unwrap_or((g.t_end / 2000.0).max(g.dt));
    if !(record_interval > 0.0) {
        return Err(LabError::config("grid.record_interval", "must be > 0"));
    }
    let mut snaps: Vec<f64> = opts.snapshot_times.iter().cloned().filter(|&t| t <= g.t_end).collect();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let mut snapshots = Vec::new();
    let mut snap_idx = 0;
    while snap_idx < snaps.len() && snaps[snap_idx] <= 0.0 {
        snapshots.push(Snapshot {
            t: 0.0,
            h: state.h,
            profiles: state.profiles.clone(),
        });
        snap_idx += 1;
    }

    let mut records = vec![TrajectoryRecord::of(&state)];
    let mut next_record = 1usize;
    let mut max_clamp: f64 = 0.0;
    let mut min_inc = f64::INFINITY;
    let mut min_density = state.profiles.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let mut steps = 0usize;
    let mut stopped_early = false;
    let dy = g.dy();

    while state.t < g.t_end {
        let record_at = (next_record as f64 * record_interval).min(g.t_end);
        let mut target = record_at;
        if snap_idx < snaps.len() {
            target = target.min(snaps[snap_idx]);
        }
        let mut dt = g.dt.min(target - state.t);
        while state.h_prime * dt > g.dt_safety * state.h * dy {
            dt *= 0.5;
        }
        if dt <= 0.0 || !dt.is_finite() {
            return Err(LabError::SolverFailure {
                t: state.t,
                message: format!("time step collapsed (dt = {dt}, h' = {})", state.h_prime),
            });
        }
        let out = step_system(sys, &state, dt)?;
        steps += 1;
        min_inc = min_inc.min(out.state.h - state.h);
        max_clamp = max_clamp.max(out.clamped);
        state = out.state;
        if (state.t - target).abs() <= 1e-10 * target.abs().max(1.0) {
            state.t = target;
        }
        if snap_idx < snaps.len() && state.t >= snaps[snap_idx] {
            snapshots.push(Snapshot {
                t: state.t,
                h: state.h,
                profiles: state.profiles.clone(),
            });
            snap_idx += 1;
        }
        if state.t >= record_at {
            records.push(TrajectoryRecord::of(&state));
            min_density = min_density.min(state.profiles.iter().flatten().cloned().fold(f64::INFINITY, f64::min));
            next_record += 1;
            if stop(&records, &state) {
                stopped_early = state.t < g.t_end;
                break;
            }
        }
    }
    if records.last().map(|r| r.t) != Some(state.t) {
        records.push(TrajectoryRecord::of(&state));
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
        t_end: g.t_end,
        max_clamp,
        min_front_increment: min_inc,
        min_density,
        steps,
        stopped_early,
    })
}

/// Integrates the predator-prey system to `g.t_end`.
pub fn run(p: &ModelParams, init: &InitialData, g: &GridSpec) -> Result<Trajectory> {
    run_with(p, init, g, &RunOptions::default(), &mut |_, _| false)
}

/// [`run`] with explicit output options and a termination hook.
pub fn run_with(
    p: &ModelParams,
    init: &InitialData,
    g: &GridSpec,
    opts: &RunOptions,
    stop: &mut StopFn<'_>,
) -> Result<Trajectory> {
    if (init.h0() - p.h0).abs() > 1e-12 * p.h0 {
        return Err(LabError::Precondition(format!(
            "initial data live on [0, {}] but h0 = {}",
            init.h0(),
            p.h0
        )));
    }
    run_system(&PredatorPrey(*p), &[init.u0(), init.v0()], p.h0, g, opts, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn state_from(profile: impl Fn(f64) -> f64, n: usize, h: f64) -> SolutionState {
        let w: Vec<f64> = (0..=n).map(|j| profile(j as f64 / n as f64)).collect();
        SolutionState {
            t: 0.0,
            h,
            h_prime: 0.0,
            profiles: vec![w.clone(), w],
        }
    }

    #[test]
    fn gradient_linear_ramp() {
        let s = state_from(|y| 1.0 - y, 32, 2.0);
        let (gu, gv) = boundary_gradient(&s);
        assert!((gu + 0.5).abs() < 1e-13);
        assert!((gv + 0.5).abs() < 1e-13);
    }

    #[test]
    fn gradient_quadratic() {
        let s = state_from(|y| (1.0 - y).powi(2), 32, 1.0);
        assert!(boundary_gradient(&s).0.abs() < 1e-12);
    }

    #[test]
    fn gradient_cosine() {
        let s = state_from(|y| (FRAC_PI_2 * y).cos(), 200, 1.0);
        assert!((boundary_gradient(&s).0 + FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn zero_state_is_stationary() {
        let p = ModelParams::reference(1.0, 1.0, 0.5);
        let s = SolutionState {
            t: 0.0,
            h: 0.5,
            h_prime: 0.0,
            profiles: vec![vec![0.0; 33], vec![0.0; 33]],
        };
        let g = GridSpec::new(32, 0.01, 1.0);
        let next = step(&s, &p, &g).unwrap();
        assert_eq!(next.t, 0.01);
        assert_eq!(next.h, 0.5);
        assert_eq!(next.h_prime, 0.0);
        assert_eq!(next.profiles, s.profiles);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(8, 0.01, 1.0).validate().is_err());
        assert!(GridSpec::new(32, 0.0, 1.0).validate().is_err());
        assert!(GridSpec::new(32, 0.01, -1.0).validate().is_err());
        assert!(GridSpec::new(32, 0.01, 1.0).validate().is_ok());
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let p = ModelParams::reference(1.0, 1.0, 0.5);
        let init = InitialData::cosine(0.5, 0.5, 0.5, 101).unwrap();
        let g = GridSpec::new(32, 0.01, 1.0);
        let opts = RunOptions {
            record_interval: Some(0.1),
            snapshot_times: vec![0.0, 0.333, 0.75],
        };
        let tr = run_with(&p, &init, &g, &opts, &mut |_, _| false).unwrap();
        let ts: Vec<f64> = tr.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.333, 0.75]);
        assert_eq!(tr.records.len(), 11);
        assert!(tr.records.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(tr.last().t, 1.0);
    }
}
