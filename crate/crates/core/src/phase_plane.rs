//! Phase-plane constructions for d q'' − s q' + f(q) = 0.
//!
//! Written as the planar system q' = p, d p' = s p − f(q). Finite-length
//! waves start at (0, η) and stop where p first vanishes.

use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::error::{LabError, Result};
use crate::model::{coexistence_state, ModelParams};
use crate::numerics::ode::{Dopri5, Planar};
use crate::numerics::quadrature::{integrate, QuadTol};
use crate::numerics::roots::bisect;

/// A reaction term with f(0) = 0, f > 0 on (0, θ) and f(θ) = 0.
pub trait Nonlinearity: Sync {
    fn eval(&self, q: f64) -> f64;
    /// The positive zero θ.
    fn theta(&self) -> f64;
    fn diffusivity(&self) -> f64;
    fn slope_at_zero(&self) -> f64;
}

/// f(q) = νq − q² + c·u·q/(u + mq) with the prey frozen at `u_fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveNonlinearity {
    pub u_fixed: f64,
    pub nu: f64,
    pub c: f64,
    pub m: f64,
    pub d: f64,
}

impl WaveNonlinearity {
    pub fn new(u_fixed: f64, nu: f64, c: f64, m: f64, d: f64) -> Result<Self> {
        for (name, x) in [("u_fixed", u_fixed), ("nu", nu), ("m", m), ("d", d)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(LabError::Precondition(format!("{name} must be positive, got {x}")));
            }
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(LabError::Precondition(format!("c must be non-negative, got {c}")));
        }
        Ok(WaveNonlinearity { u_fixed, nu, c, m, d })
    }

    /// The predator nonlinearity with the prey frozen at u*.
    pub fn at_coexistence(p: &ModelParams) -> Result<Self> {
        let eq = coexistence_state(p)?;
        Self::new(eq.u_star, p.nu, p.c, p.m, p.d)
    }

    /// ∫₀^q f in closed form.
    pub fn primitive(&self, q: f64) -> f64 {
        let (u, m) = (self.u_fixed, self.m);
        0.5 * self.nu * q * q - q * q * q / 3.0 + self.c * u * (q / m - u / (m * m) * (m * q / u).ln_1p())
    }
}

impl Nonlinearity for WaveNonlinearity {
    #[inline]
    fn eval(&self, q: f64) -> f64 {
        self.nu * q - q * q + self.c * self.u_fixed * q / (self.u_fixed + self.m * q)
    }
    fn theta(&self) -> f64 {
        // m q² − (νm − u) q − u(ν + c) = 0
        let (u, m) = (self.u_fixed, self.m);
        let bq = self.nu * m - u;
        (bq + (bq * bq + 4.0 * m * u * (self.nu + self.c)).sqrt()) / (2.0 * m)
    }
    fn diffusivity(&self) -> f64 {
        self.d
    }
    fn slope_at_zero(&self) -> f64 {
        self.nu + self.c
    }
}

const PRIMITIVE_TOL: f64 = 1e-13;

fn primitive<N: Nonlinearity + ?Sized>(w: &N, q: f64) -> Result<f64> {
    integrate(|t| w.eval(t), 0.0, q, QuadTol::relative(PRIMITIVE_TOL))
}

/// Z* = (π/2)√(d/f′(0)), the infimum of finite-wave lengths.
pub fn z_star<N: Nonlinearity + ?Sized>(w: &N) -> f64 {
    FRAC_PI_2 * (w.diffusivity() / w.slope_at_zero()).sqrt()
}

/// η* = √((2/d)∫₀^θ f).
pub fn eta_star<N: Nonlinearity + ?Sized>(w: &N) -> Result<f64> {
    let area = integrate(|t| w.eval(t), 0.0, w.theta(), QuadTol::relative(1e-10))?;
    Ok((2.0 / w.diffusivity() * area).sqrt())
}

fn check_eta<N: Nonlinearity + ?Sized>(w: &N, eta: f64) -> Result<f64> {
    let es = eta_star(w)?;
    if !(eta > 0.0 && eta < es) {
        return Err(LabError::Precondition(format!("eta must lie in (0, {es}), got {eta}")));
    }
    Ok(es)
}

/// The height q^η ∈ (0, θ) with η² = (2/d)∫₀^{q^η} f.
pub fn q_eta<N: Nonlinearity + ?Sized>(w: &N, eta: f64) -> Result<f64> {
    check_eta(w, eta)?;
    let theta = w.theta();
    let d = w.diffusivity();
    let target = eta * eta;
    let mut failure = None;
    let q = bisect(
        |q| match primitive(w, q) {
            Ok(v) => 2.0 / d * v - target,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        theta,
        1e-12,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    q
}

/// z^η = ∫₀^{q^η} dr / √((2/d)∫_r^{q^η} f), evaluated after r = q^η sin²ϑ.
pub fn z_eta<N: Nonlinearity + ?Sized>(w: &N, eta: f64) -> Result<f64> {
    let qe = q_eta(w, eta)?;
    let d = w.diffusivity();
    let mut failure = None;
    let val = integrate(
        |th| {
            let (s, c) = th.sin_cos();
            let len = qe * c * c;
            let avg = match integrate(|x| w.eval(qe - len * x), 0.0, 1.0, QuadTol::relative(PRIMITIVE_TOL)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    return 0.0;
                }
            };
            2.0 * s * qe.sqrt() / (2.0 / d * avg).sqrt()
        },
        0.0,
        FRAC_PI_2,
        QuadTol::relative(1e-10),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(val)
}

/// A solution of the wave system, sampled at the integrator's steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveProfile {
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub q_end: f64,
    pub z_end: f64,
    pub s: f64,
    pub eta: f64,
}

impl WaveProfile {
    /// p as a function of q on the monotone branch, by linear interpolation.
    pub fn p_of_q(&self, q: f64) -> Option<f64> {
        if q < self.q[0] || q > self.q_end {
            return None;
        }
        let i = self.q.partition_point(|&x| x < q);
        if i == 0 {
            return Some(self.p[0]);
        }
        let (q0, q1) = (self.q[i - 1], self.q[i]);
        let t = if q1 > q0 { (q - q0) / (q1 - q0) } else { 1.0 };
        Some(self.p[i - 1] + t * (self.p[i] - self.p[i - 1]))
    }
}

fn wave_rhs<'a, N: Nonlinearity + ?Sized>(w: &'a N, s: f64) -> impl Fn(f64, &Planar) -> Planar + 'a {
    let d = w.diffusivity();
    move |_, y| [y[1], (s * y[1] - w.eval(y[0])) / d]
}

/// Integrates q' = p, d p' = s p − f(q) from (0, η) to the first zero of p.
pub fn finite_wave<N: Nonlinearity + ?Sized>(w: &N, s: f64, eta: f64) -> Result<WaveProfile> {
    check_eta(w, eta)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(LabError::Precondition(format!("wave speed must be >= 0, got {s}")));
    }
    let horizon = 200.0 * (z_star(w) + 1.0);
    let ode = Dopri5 {
        event_tol: 1e-12,
        ..Dopri5::default()
    };
    let path = ode.integrate_until(wave_rhs(w, s), 0.0, [0.0, eta], horizon, |y| y[1])?;
    let (z_end, end) = path
        .event
        .ok_or_else(|| LabError::Numerical("no finite wave for these inputs".into()))?;
    Ok(WaveProfile {
        q: path.y.iter().map(|y| y[0]).collect(),
        p: path.y.iter().map(|y| y[1]).collect(),
        z: path.z,
        q_end: end[0],
        z_end,
        s,
        eta,
    })
}

/// Positive solution of d v'' + f(v) = 0 on (0, Z), v'(0) = 0, v(Z) = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalProfile {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    /// v(0).
    pub height: f64,
    pub length: f64,
}

const BVP_SCAN: usize = 64;
const BVP_GEOMETRIC: usize = 30;
const BVP_SAMPLES: usize = 400;

/// First zero of v for d v'' = −f(v), v(0) = q₀, v'(0) = 0; `None` beyond `limit`.
fn landing<N: Nonlinearity + ?Sized>(w: &N, q0: f64, limit: f64) -> Result<Option<f64>> {
    let d = w.diffusivity();
    let ode = Dopri5::default();
    let path = ode.integrate_until(|_, y| [y[1], -w.eval(y[0]) / d], 0.0, [q0, 0.0], limit, |y| y[0])?;
    Ok(path.event.map(|(x, _)| x))
}

/// Shoots on v(0) ∈ (0, θ) for a positive solution on (0, Z) vanishing at Z.
/// Returns `None` when no initial height lands on Z.
pub fn solve_bvp_critical<N: Nonlinearity + ?Sized>(w: &N, length: f64) -> Result<Option<CriticalProfile>> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(LabError::Precondition(format!("length must be positive, got {length}")));
    }
    let theta = w.theta();
    let limit = 2.0 * length;
    // landing − Z, with "never lands before 2Z" counted as positive
    let miss = |q0: f64| -> Result<f64> { Ok(landing(w, q0, limit)?.map_or(length, |x| x - length)) };

    // geometric heights first: when f bends sharply near 0 the landing
    // length leaves Z* well below the first uniform height
    let first = theta / (BVP_SCAN + 1) as f64;
    let heights: Vec<f64> = (1..=BVP_GEOMETRIC)
        .rev()
        .map(|k| first * 0.5f64.powi(k as i32))
        .chain((1..=BVP_SCAN).map(|k| theta * k as f64 / (BVP_SCAN + 1) as f64))
        .collect();
    let mut prev = (heights[0], miss(heights[0])?);
    let mut bracket = None;
    if prev.1 == 0.0 {
        bracket = Some((prev.0, prev.0));
    } else {
        for &q in &heights[1..] {
            let m = miss(q)?;
            if m == 0.0 || m.signum() != prev.1.signum() {
                bracket = Some((prev.0, q));
                break;
            }
            prev = (q, m);
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(None);
    };
    let mut m_lo = miss(lo)?;
    let mut height = lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m_mid = miss(mid)?;
        height = mid;
        if m_mid.abs() <= 1e-10 || hi - lo <= 1e-15 * theta {
            break;
        }
        if m_mid.signum() == m_lo.signum() {
            lo = mid;
            m_lo = m_mid;
        } else {
            hi = mid;
        }
    }

    let d = w.diffusivity();
    let x: Vec<f64> = (0..=BVP_SAMPLES).map(|i| length * i as f64 / BVP_SAMPLES as f64).collect();
    let ys = Dopri5::default().sample(|_, y| [y[1], -w.eval(y[0]) / d], [height, 0.0], &x)?;
    Ok(Some(CriticalProfile {
        v: ys.iter().map(|y| y[0]).collect(),
        v_prime: ys.iter().map(|y| y[1]).collect(),
        x,
        height,
        length,
    }))
}

impl CriticalProfile {
    /// Largest residual of the wave system with s = 0 along the reflected
    /// trajectory (q, p)(z) = (v, −v′)(Z − z), using fourth-order differences.
    pub fn wave_residual<N: Nonlinearity + ?Sized>(&self, w: &N) -> f64 {
        let n = self.x.len();
        let dz = self.x[1] - self.x[0];
        let q: Vec<f64> = self.v.iter().rev().cloned().collect();
        let p: Vec<f64> = self.v_prime.iter().rev().map(|x| -x).collect();
        let deriv = |a: &[f64], i: usize| (a[i - 2] - 8.0 * a[i - 1] + 8.0 * a[i + 1] - a[i + 2]) / (12.0 * dz);
        let mut worst: f64 = 0.0;
        for i in 2..n - 2 {
            worst = worst.max((deriv(&q, i) - p[i]).abs());
            worst = worst.max((w.diffusivity() * deriv(&p, i) + w.eval(q[i])).abs());
        }
        worst
    }
}

/// A monotone front rising from 0 to its saturation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontProfile {
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub growth: f64,
    pub diffusivity: f64,
}

impl FrontProfile {
    pub fn terminal(&self) -> f64 {
        *self.q.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TravelingWavePair {
    pub phi: FrontProfile,
    pub psi: FrontProfile,
    pub s: f64,
}

/// Relative offset from the saturated state where backward shooting starts.
pub const MANIFOLD_OFFSET: f64 = 1e-6;
/// Height at which the front is cut and pinned to zero.
pub const FRONT_CUTOFF: f64 = 1e-10;

/// D q'' − s q' + q(g − q) = 0 from the stable direction at q = g back to q = 0.
pub fn logistic_front(growth: f64, diffusivity: f64, s: f64) -> Result<FrontProfile> {
    let (g, dd) = (growth, diffusivity);
    if !(g > 0.0 && dd > 0.0) {
        return Err(LabError::Precondition("growth and diffusivity must be positive".into()));
    }
    if s <= 2.0 * (dd * g).sqrt() {
        return Err(LabError::Precondition(format!(
            "speed {s} is at or below 2*sqrt(D*g) = {}; profile would oscillate",
            2.0 * (dd * g).sqrt()
        )));
    }
    let r = (s - (s * s + 4.0 * dd * g).sqrt()) / (2.0 * dd);
    let w0 = MANIFOLD_OFFSET * g;
    let start = [g - w0, -r * w0];
    // ζ = −z runs toward the leading edge
    let rhs = move |_: f64, y: &Planar| [-y[1], -(s * y[1] - y[0] * (g - y[0])) / dd];
    let horizon = 1e4 * (dd / g).sqrt() + 1e4 / s;
    let ode = Dopri5::with_tolerances(1e-10, 1e-14);
    let path = ode.integrate_until(rhs, 0.0, start, horizon, |y| y[0] - FRONT_CUTOFF)?;
    let (zeta_end, _) = path
        .event
        .ok_or_else(|| LabError::Numerical("front did not reach the cutoff height".into()))?;
    let mut z: Vec<f64> = path.z.iter().rev().map(|zeta| zeta_end - zeta).collect();
    let mut q: Vec<f64> = path.y.iter().rev().map(|y| y[0]).collect();
    let p: Vec<f64> = path.y.iter().rev().map(|y| y[1]).collect();
    z[0] = 0.0;
    q[0] = 0.0;
    Ok(FrontProfile {
        z,
        q,
        p,
        growth: g,
        diffusivity: dd,
    })
}

/// The decoupled pair φ (growth λ, diffusivity 1) and ψ (growth ν + c, diffusivity d).
pub fn traveling_wave(p: &ModelParams, s: f64) -> Result<TravelingWavePair> {
    let bound = crate::model::speed_upper_bound(p);
    if s <= bound {
        return Err(LabError::Precondition(format!(
            "speed {s} is at or below {bound}; profile would oscillate"
        )));
    }
    Ok(TravelingWavePair {
        phi: logistic_front(p.lambda, 1.0, s)?,
        psi: logistic_front(p.nu + p.c, p.d, s)?,
        s,
    })
}
