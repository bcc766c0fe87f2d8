//! Model constants, reaction terms, equilibria and the closed-form thresholds
//! that govern spreading and vanishing.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{roots::bisect, trapezoid_uniform};

/// The nine positive constants of the free-boundary predator-prey system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Prey growth rate.
    pub lambda: f64,
    /// Predation coefficient.
    pub b: f64,
    /// Ratio-dependence saturation.
    pub m: f64,
    /// Predator diffusivity (prey diffusivity is 1).
    pub d: f64,
    /// Predator intrinsic rate.
    pub nu: f64,
    /// Conversion coefficient.
    pub c: f64,
    /// Front expansion coefficient.
    pub mu: f64,
    /// Predator weight in the front law.
    pub rho: f64,
    /// Initial habitat length.
    pub h0: f64,
}

impl ModelParams {
    /// The parameter set used throughout the tests and examples
    /// (λ=1, b=0.5, m=1, d=1, ν=1, c=0.5) with the given μ, ρ, h₀.
    pub fn reference(mu: f64, rho: f64, h0: f64) -> Self {
        ModelParams {
            lambda: 1.0,
            b: 0.5,
            m: 1.0,
            d: 1.0,
            nu: 1.0,
            c: 0.5,
            mu,
            rho,
            h0,
        }
    }

    pub fn new(lambda: f64, b: f64, m: f64, d: f64, nu: f64, c: f64, mu: f64, rho: f64, h0: f64) -> Result<Self> {
        let p = ModelParams {
            lambda,
            b,
            m,
            d,
            nu,
            c,
            mu,
            rho,
            h0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn named_fields(&self) -> [(&'static str, f64); 9] {
        [
            ("lambda", self.lambda),
            ("b", self.b),
            ("m", self.m),
            ("d", self.d),
            ("nu", self.nu),
            ("c", self.c),
            ("mu", self.mu),
            ("rho", self.rho),
            ("h0", self.h0),
        ]
    }

    /// Every field must be finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named_fields() {
            if !(value.is_finite() && value > 0.0) {
                return Err(LabError::config(name, format!("must be finite and > 0, got {value}")));
            }
        }
        Ok(())
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }

    /// m·λ > b: the prey survives predation at any predator density.
    pub fn prey_viable(&self) -> bool {
        self.m * self.lambda > self.b
    }

    /// 0 < m·λ − b < b·ν/c: the positive coexistence state exists.
    pub fn coexistence_regime(&self) -> bool {
        let gap = self.m * self.lambda - self.b;
        gap > 0.0 && gap < self.b * self.nu / self.c
    }

    /// Uniform bound max{λ, ‖u₀‖∞} for the prey density.
    pub fn prey_bound(&self, init: &InitialData) -> f64 {
        self.lambda.max(init.sup_u())
    }

    /// Uniform bound max{ν + c, ‖v₀‖∞} for the predator density.
    pub fn predator_bound(&self, init: &InitialData) -> f64 {
        (self.nu + self.c).max(init.sup_v())
    }
}

/// u·v/(u + m·v), extended by 0 at the origin.
#[inline]
pub(crate) fn ratio_term(u: f64, v: f64, m: f64) -> f64 {
    let den = u + m * v;
    if den > 0.0 {
        u * v / den
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn prey_rate(u: f64, v: f64, p: &ModelParams) -> f64 {
    p.lambda * u - u * u - p.b * ratio_term(u, v, p.m)
}

#[inline]
pub(crate) fn predator_rate(u: f64, v: f64, p: &ModelParams) -> f64 {
    p.nu * v - v * v + p.c * ratio_term(u, v, p.m)
}

fn check_densities(u: f64, v: f64) -> Result<()> {
    if !(u >= 0.0 && v >= 0.0) {
        return Err(LabError::Domain(format!("densities must be non-negative, got u = {u}, v = {v}")));
    }
    Ok(())
}

/// Prey reaction λu − u² − b·u·v/(u + m·v).
pub fn reaction_u(u: f64, v: f64, p: &ModelParams) -> Result<f64> {
    check_densities(u, v)?;
    Ok(prey_rate(u, v, p))
}

/// Predator reaction νv − v² + c·u·v/(u + m·v).
pub fn reaction_v(u: f64, v: f64, p: &ModelParams) -> Result<f64> {
    check_densities(u, v)?;
    Ok(predator_rate(u, v, p))
}

/// Sampled initial profiles on `[0, h₀]` at uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    h0: f64,
    u0: Vec<f64>,
    v0: Vec<f64>,
}

impl InitialData {
    /// `a_u·cos(πx/(2h₀))`, `a_v·cos(πx/(2h₀))`, which meets both the
    /// Neumann and the Dirichlet compatibility conditions exactly.
    pub fn cosine(h0: f64, amp_u: f64, amp_v: f64, n_samples: usize) -> Result<Self> {
        if n_samples < 3 {
            return Err(LabError::Precondition("need at least 3 samples of the initial data".into()));
        }
        let dx = h0 / (n_samples - 1) as f64;
        let shape: Vec<f64> = (0..n_samples)
            .map(|i| if i + 1 == n_samples { 0.0 } else { (FRAC_PI_2 * i as f64 * dx / h0).cos() })
            .collect();
        Self::from_samples(
            h0,
            shape.iter().map(|s| amp_u * s).collect(),
            shape.iter().map(|s| amp_v * s).collect(),
        )
    }

    /// Validates user-supplied samples. A species may be absent (identically zero);
    /// otherwise its profile must be positive on `[0, h₀)`, vanish at `h₀`, and have
    /// a flat start.
    pub fn from_samples(h0: f64, u0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(LabError::Precondition(format!("h0 must be positive, got {h0}")));
        }
        if u0.len() != v0.len() || u0.len() < 3 {
            return Err(LabError::Precondition("initial profiles need equal length >= 3".into()));
        }
        let dx = h0 / (u0.len() - 1) as f64;
        for (name, w) in [("u0", &u0), ("v0", &v0)] {
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            let n = w.len();
            if w[n - 1] != 0.0 {
                return Err(LabError::Precondition(format!("{name}(h0) must be exactly 0")));
            }
            if let Some(i) = w[..n - 1].iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(LabError::Precondition(format!("{name} must be positive on [0, h0), fails at sample {i}")));
            }
            let sup = w.iter().cloned().fold(0.0, f64::max);
            let slope = (w[1] - w[0]) / dx;
            if slope.abs() > 10.0 * sup * dx / (h0 * h0) {
                return Err(LabError::Precondition(format!(
                    "{name} violates the Neumann condition at x = 0 (one-sided slope {slope})"
                )));
            }
        }
        Ok(InitialData { h0, u0, v0 })
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }
    pub fn u0(&self) -> &[f64] {
        &self.u0
    }
    pub fn v0(&self) -> &[f64] {
        &self.v0
    }
    pub fn n_samples(&self) -> usize {
        self.u0.len()
    }
    pub fn spacing(&self) -> f64 {
        self.h0 / (self.u0.len() - 1) as f64
    }
    pub fn sup_u(&self) -> f64 {
        self.u0.iter().cloned().fold(0.0, f64::max)
    }
    pub fn sup_v(&self) -> f64 {
        self.v0.iter().cloned().fold(0.0, f64::max)
    }
    pub fn integral_u(&self) -> f64 {
        trapezoid_uniform(&self.u0, self.spacing())
    }
    pub fn integral_v(&self) -> f64 {
        trapezoid_uniform(&self.v0, self.spacing())
    }

    /// Piecewise-linear interpolation of a profile at `x ∈ [0, h₀]`.
    pub fn interpolate(samples: &[f64], h0: f64, x: f64) -> f64 {
        let n = samples.len();
        let s = (x / h0).clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (s.floor() as usize).min(n - 2);
        let frac = s - i as f64;
        samples[i] * (1.0 - frac) + samples[i + 1] * frac
    }

    /// The same profiles restricted to a single species (the other set to zero).
    pub fn prey_only(&self) -> Self {
        InitialData {
            h0: self.h0,
            u0: self.u0.clone(),
            v0: vec![0.0; self.v0.len()],
        }
    }

    pub fn predator_only(&self) -> Self {
        InitialData {
            h0: self.h0,
            u0: vec![0.0; self.u0.len()],
            v0: self.v0.clone(),
        }
    }
}

/// The positive constant steady state (u*, v*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoexistenceState {
    pub u_star: f64,
    pub v_star: f64,
    pub a: f64,
    pub delta1: f64,
}

impl CoexistenceState {
    /// Residuals of the two equilibrium equations.
    pub fn residuals(&self, p: &ModelParams) -> (f64, f64) {
        let (u, v) = (self.u_star, self.v_star);
        (
            p.lambda - u - p.b * v / (u + p.m * v),
            p.nu - v + p.c * u / (u + p.m * v),
        )
    }
}

/// Closed-form coexistence state, valid for 0 < mλ − b < bν/c.
pub fn coexistence_state(p: &ModelParams) -> Result<CoexistenceState> {
    if !p.coexistence_regime() {
        return Err(LabError::Precondition(format!(
            "coexistence requires 0 < m*lambda - b < b*nu/c (m*lambda - b = {}, b*nu/c = {})",
            p.m * p.lambda - p.b,
            p.b * p.nu / p.c
        )));
    }
    let (l, b, m, nu, c) = (p.lambda, p.b, p.m, p.nu, p.c);
    let a = l * (2.0 * c * m * m + b) - m * b * (nu + 2.0 * c);
    let delta1 = a * a + 4.0 * (b + c * m * m) * (b * (nu + c) - m * c * l) * (m * l - b);
    if delta1 < 0.0 {
        return Err(LabError::Internal(format!("negative discriminant {delta1} inside the coexistence regime")));
    }
    let u_star = (a + delta1.sqrt()) / (2.0 * (b + c * m * m));
    let v_star = u_star * (l - u_star) / (b - m * (l - u_star));
    if !(u_star > 0.0 && v_star > 0.0) {
        return Err(LabError::Internal(format!("non-positive coexistence state ({u_star}, {v_star})")));
    }
    Ok(CoexistenceState {
        u_star,
        v_star,
        a,
        delta1,
    })
}

/// Limits (ū, u̲, v̄, v̲) bracketing the long-time densities when spreading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuadruple {
    pub u_upper: f64,
    pub u_lower: f64,
    pub v_upper: f64,
    pub v_lower: f64,
    pub iterations: usize,
}

impl BoundQuadruple {
    /// Residuals of the four determining equations, in the order
    /// (u̲ with v̄), (ū with v̲), (v̄ with ū), (v̲ with u̲).
    pub fn residuals(&self, p: &ModelParams) -> [f64; 4] {
        [
            p.lambda - self.u_lower - p.b * self.v_upper / (self.u_lower + p.m * self.v_upper),
            p.lambda - self.u_upper - p.b * self.v_lower / (self.u_upper + p.m * self.v_lower),
            p.nu - self.v_upper + p.c * self.u_upper / (self.u_upper + p.m * self.v_upper),
            p.nu - self.v_lower + p.c * self.u_lower / (self.u_lower + p.m * self.v_lower),
        ]
    }
}

const QUADRUPLE_MAX_ITER: usize = 100_000;

/// Positive root u of λ − u − b·v/(u + m·v) = 0 on [0, λ].
fn prey_root(v: f64, p: &ModelParams) -> Result<f64> {
    bisect(
        |u| {
            let den = u + p.m * v;
            p.lambda - u - if den > 0.0 { p.b * v / den } else { 0.0 }
        },
        0.0,
        p.lambda,
        1e-15 * p.lambda,
        200,
    )
}

/// Positive root v of ν − v + c·u/(u + m·v) = 0 on [0, ν + c].
fn predator_root(u: f64, p: &ModelParams) -> Result<f64> {
    let hi = p.nu + p.c;
    bisect(|v| p.nu - v + p.c * u / (u + p.m * v), 0.0, hi, 1e-15 * hi, 200)
}

/// Monotone iteration for the bound quadruple seeded at ū = λ, v̄ = ν + c.
pub fn bound_quadruple(p: &ModelParams) -> Result<BoundQuadruple> {
    if !p.prey_viable() {
        return Err(LabError::Precondition(format!(
            "bound quadruple requires m*lambda > b (m*lambda = {}, b = {})",
            p.m * p.lambda,
            p.b
        )));
    }
    let mut u_upper = p.lambda;
    let mut v_upper = p.nu + p.c;
    let mut u_lower = 0.0;
    let mut v_lower = 0.0;
    for it in 1..=QUADRUPLE_MAX_ITER {
        let nv_upper = predator_root(u_upper, p)?;
        let nu_lower = prey_root(nv_upper, p)?;
        let nv_lower = predator_root(nu_lower, p)?;
        let nu_upper = prey_root(nv_lower, p)?;
        let change = (nv_upper - v_upper)
            .abs()
            .max((nu_lower - u_lower).abs())
            .max((nv_lower - v_lower).abs())
            .max((nu_upper - u_upper).abs());
        u_upper = nu_upper;
        v_upper = nv_upper;
        u_lower = nu_lower;
        v_lower = nv_lower;
        if change < 1e-10 && it > 1 {
            // One more sweep so the upper pair is consistent with the final lower pair.
            let v_upper = predator_root(u_upper, p)?;
            let u_lower = prey_root(v_upper, p)?;
            let v_lower = predator_root(u_lower, p)?;
            return Ok(BoundQuadruple {
                u_upper,
                u_lower,
                v_upper,
                v_lower,
                iterations: it,
            });
        }
    }
    Err(LabError::Numerical(format!(
        "bound quadruple iteration did not settle in {QUADRUPLE_MAX_ITER} sweeps (last iterate u in [{u_lower}, {u_upper}], v in [{v_lower}, {v_upper}])"
    )))
}

/// Closed-form thresholds. `None` marks a branch that does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub capital_lambda: f64,
    pub z_star: f64,
    pub mu_star: Option<f64>,
    pub mu_star_star: Option<f64>,
    pub mu_zero: Option<f64>,
    pub speed_upper: f64,
}

/// Critical length (π/2)√(m/(mλ−b)) of the prey under maximal predation.
pub fn prey_critical_length(p: &ModelParams) -> f64 {
    FRAC_PI_2 * (p.m / (p.m * p.lambda - p.b)).sqrt()
}

/// Critical length (π/2)√(d/(ν+c)) of the predator.
pub fn predator_critical_length(p: &ModelParams) -> f64 {
    FRAC_PI_2 * (p.d / (p.nu + p.c)).sqrt()
}

/// min{(π/2)√(m/(mλ−b)), (π/2)√(d/ν)}: the habitat length below which both
/// species can die out together. Once the prey is gone the predator grows at
/// rate ν, not ν + c, so this can exceed Λ.
pub fn joint_extinction_length(p: &ModelParams) -> f64 {
    prey_critical_length(p).min(FRAC_PI_2 * (p.d / p.nu).sqrt())
}

/// 2·max{√λ, √(d(ν+c))}.
pub fn speed_upper_bound(p: &ModelParams) -> f64 {
    2.0 * p.lambda.sqrt().max((p.d * (p.nu + p.c)).sqrt())
}

pub fn thresholds(p: &ModelParams, init: &InitialData) -> Result<Thresholds> {
    if !p.prey_viable() {
        return Err(LabError::Precondition("thresholds require m*lambda > b".into()));
    }
    let prey_len = prey_critical_length(p);
    let pred_len = predator_critical_length(p);
    let gap = p.m * p.lambda - p.b;

    let int_u = init.integral_u();
    let mu_star = (p.h0 < prey_len && int_u > 0.0)
        .then(|| 1f64.max(p.m * init.sup_u() / gap) * (prey_len - p.h0) / int_u);
    let int_v = init.integral_v();
    let mu_star_star = (p.h0 < pred_len && int_v > 0.0)
        .then(|| 1f64.max(init.sup_v() / p.nu) * (p.d / p.nu) * (pred_len - p.h0) / int_v);
    let mu_zero = match (mu_star, mu_star_star) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(Thresholds {
        capital_lambda: prey_len.min(pred_len),
        z_star: pred_len,
        mu_star,
        mu_star_star,
        mu_zero,
        speed_upper: speed_upper_bound(p),
    })
}

/// Decaying cosine upper solution
/// ū = v̄ = M e^{−βt} cos(πx/(2σ(t))), σ(t) = h₀(1 + δ − (δ/2)e^{−βt}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperSolution {
    pub h0: f64,
    pub delta: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub mu0: f64,
}

impl UpperSolution {
    pub fn sigma(&self, t: f64) -> f64 {
        self.h0 * (1.0 + self.delta - 0.5 * self.delta * (-self.beta * t).exp())
    }

    /// Value of the upper profile; zero beyond σ(t).
    pub fn value(&self, t: f64, x: f64) -> f64 {
        let s = self.sigma(t);
        if x >= s {
            0.0
        } else {
            self.amplitude * (-self.beta * t).exp() * (FRAC_PI_2 * x / s).cos()
        }
    }
}

/// Builds the cosine upper solution and the vanishing coefficient μ₀.
///
/// The decay rate uses min{1, d} on the diffusion term so that the same
/// profile dominates the predator equation when d < 1; for d ≥ 1 it is
/// β = ½(π/2)²h₀⁻²(1+δ)⁻² − ½max{λ, ν+c}.
pub fn upper_solution_construct(p: &ModelParams, init: &InitialData, delta: f64) -> Result<UpperSolution> {
    if !(delta > 0.0) {
        return Err(LabError::Precondition(format!("delta must be positive, got {delta}")));
    }
    let h0 = p.h0;
    let spread = FRAC_PI_2 * FRAC_PI_2 * p.d.min(1.0) / (h0 * h0 * (1.0 + delta).powi(2));
    let beta = 0.5 * spread - 0.5 * p.lambda.max(p.nu + p.c);
    if !(beta > 0.0) {
        return Err(LabError::Precondition(format!(
            "no decaying upper solution for h0 = {h0}, delta = {delta} (beta = {beta}); try a smaller delta"
        )));
    }
    let sigma0 = h0 * (1.0 + 0.5 * delta);
    let dx = init.spacing();
    let mut amplitude: f64 = 0.0;
    for (i, (u, v)) in init.u0().iter().zip(init.v0()).enumerate() {
        let x = i as f64 * dx;
        amplitude = amplitude.max(u.max(*v) / (FRAC_PI_2 * x / sigma0).cos());
    }
    if amplitude == 0.0 {
        return Err(LabError::Precondition("initial data are identically zero".into()));
    }
    amplitude *= 1.01;
    let mu0 = delta * beta * h0 * h0 / (2.0 * PI * amplitude * (1.0 + p.rho));
    Ok(UpperSolution {
        h0,
        delta,
        beta,
        amplitude,
        mu0,
    })
}
