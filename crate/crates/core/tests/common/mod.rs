//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use stefan_lab::model::{predator_critical_length, prey_critical_length, InitialData, ModelParams};

pub const LAMBDA: f64 = 1.0;
pub const B: f64 = 0.5;
pub const M: f64 = 1.0;
pub const D: f64 = 1.0;
pub const NU: f64 = 1.0;
pub const C: f64 = 0.5;

pub fn reference(mu: f64, h0: f64) -> ModelParams {
    ModelParams::reference(mu, 1.0, h0)
}

/// Λ of a parameter set.
pub fn capital_lambda(p: &ModelParams) -> f64 {
    prey_critical_length(p).min(predator_critical_length(p))
}

/// Reference set with h₀ = frac·Λ and matching cosine data (amplitude 0.5).
pub fn reference_setup(mu: f64, frac: f64, n_samples: usize) -> (ModelParams, InitialData) {
    let lam = capital_lambda(&reference(1.0, 1.0));
    let h0 = frac * lam;
    (reference(mu, h0), InitialData::cosine(h0, 0.5, 0.5, n_samples).unwrap())
}

/// Builds a regime-valid set: b is placed at fraction `t` inside (mλc/(c+ν), mλ).
pub fn regime_params(lambda: f64, m: f64, nu: f64, c: f64, d: f64, t: f64) -> ModelParams {
    let b = m * lambda * (c + t * nu) / (c + nu);
    ModelParams { lambda, b, m, d, nu, c, mu: 1.0, rho: 1.0, h0: 0.5 }
}

prop_compose! {
    pub fn arb_regime()(
        lambda in 0.2f64..5.0,
        m in 0.2f64..5.0,
        nu in 0.2f64..5.0,
        c in 0.05f64..5.0,
        d in 0.2f64..5.0,
        t in 0.01f64..0.99,
    ) -> ModelParams {
        regime_params(lambda, m, nu, c, d, t)
    }
}

/// Equilibrium equations divided by u and v.
pub fn equilibrium_residual(p: &ModelParams, u: f64, v: f64) -> [f64; 2] {
    let r = u + p.m * v;
    [p.lambda - u - p.b * v / r, p.nu - v + p.c * u / r]
}

/// Grid scan for the smallest residual followed by Newton iterations with the
/// analytic Jacobian. Independent of the closed form.
pub fn brute_force_equilibrium(p: &ModelParams) -> Option<(f64, f64)> {
    let n = 400;
    let v_max = p.nu + p.c;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 1..=n {
        for j in 1..=n {
            let u = p.lambda * i as f64 / n as f64;
            let v = v_max * j as f64 / n as f64;
            let [a, b] = equilibrium_residual(p, u, v);
            let norm = a.abs() + b.abs();
            if norm < best.0 {
                best = (norm, u, v);
            }
        }
    }
    let (mut u, mut v) = (best.1, best.2);
    for _ in 0..100 {
        let r = u + p.m * v;
        let [f, g] = equilibrium_residual(p, u, v);
        // ∂/∂u, ∂/∂v of the two residuals
        let fu = -1.0 + p.b * v / (r * r);
        let fv = -p.b * u / (r * r);
        let gu = p.c * p.m * v / (r * r);
        let gv = -1.0 - p.c * p.m * u / (r * r);
        let det = fu * gv - fv * gu;
        if det == 0.0 {
            return None;
        }
        let du = (f * gv - fv * g) / det;
        let dv = (fu * g - f * gu) / det;
        u -= du;
        v -= dv;
        if du.abs() + dv.abs() < 1e-15 {
            break;
        }
    }
    let [f, g] = equilibrium_residual(p, u, v);
    (f.abs() < 1e-12 && g.abs() < 1e-12 && u > 0.0 && v > 0.0).then_some((u, v))
}

/// Composite trapezoid with `n` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Classical RK4 for a planar system, stopping when `p` changes sign; returns
/// the interpolated crossing point (z, q).
pub fn rk4_until_p_zero(d: f64, s: f64, f: impl Fn(f64) -> f64, eta: f64, dz: f64) -> (f64, f64) {
    let rhs = |y: [f64; 2]| [y[1], (s * y[1] - f(y[0])) / d];
    let mut y = [0.0, eta];
    let mut z = 0.0;
    loop {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * dz * k1[0], y[1] + 0.5 * dz * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * dz * k2[0], y[1] + 0.5 * dz * k2[1]]);
        let k4 = rhs([y[0] + dz * k3[0], y[1] + dz * k3[1]]);
        let next = [
            y[0] + dz / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dz / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[1] <= 0.0 {
            // cubic Hermite root of p on the last step
            let frac = bisect_hermite(y[1], next[1], k1[1] * dz, rhs(next)[1] * dz);
            let q = y[0] + frac * (next[0] - y[0]);
            return (z + frac * dz, q);
        }
        y = next;
        z += dz;
    }
}

fn bisect_hermite(p0: f64, p1: f64, m0: f64, m1: f64) -> f64 {
    let h = |t: f64| {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
