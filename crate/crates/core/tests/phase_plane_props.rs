mod common;

use common::*;
use proptest::prelude::*;
use stefan_lab::model::{speed_upper_bound, ModelParams};
use stefan_lab::phase_plane::*;
use stefan_lab::LabError;

fn reference_wave() -> WaveNonlinearity {
    WaveNonlinearity::at_coexistence(&reference(1.0, 0.5)).unwrap()
}

/// f multiplied by a constant.
struct Scaled<'a>(&'a WaveNonlinearity, f64);

impl Nonlinearity for Scaled<'_> {
    fn eval(&self, q: f64) -> f64 {
        self.1 * self.0.eval(q)
    }
    fn theta(&self) -> f64 {
        self.0.theta()
    }
    fn diffusivity(&self) -> f64 {
        self.0.diffusivity()
    }
    fn slope_at_zero(&self) -> f64 {
        self.1 * self.0.slope_at_zero()
    }
}

fn with_d(w: &WaveNonlinearity, factor: f64) -> WaveNonlinearity {
    WaveNonlinearity { d: w.d * factor, ..*w }
}

#[test]
fn eta_star_matches_trapezoid_oracle() {
    let w = reference_wave();
    let area = trapezoid(|q| w.eval(q), 0.0, w.theta(), 400_000);
    let oracle = (2.0 / w.d * area).sqrt();
    let es = eta_star(&w).unwrap();
    assert!((es - oracle).abs() <= 1e-8 * oracle, "{es} vs {oracle}");
}

#[test]
fn eta_star_homogeneity() {
    let w = reference_wave();
    let es = eta_star(&w).unwrap();
    assert!((eta_star(&Scaled(&w, 4.0)).unwrap() - 2.0 * es).abs() < 1e-12);
    assert!((eta_star(&with_d(&w, 4.0)).unwrap() - 0.5 * es).abs() < 1e-12);
}

#[test]
fn q_eta_limits() {
    let w = reference_wave();
    let es = eta_star(&w).unwrap();
    let theta = w.theta();
    let near_top: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|g| q_eta(&w, es * (1.0 - g)).unwrap()).collect();
    assert!(near_top.windows(2).all(|x| x[1] > x[0]));
    assert!(near_top.iter().all(|&q| q < theta));
    assert!(theta - near_top[2] < 5e-3, "q^eta = {} vs theta = {theta}", near_top[2]);
    let near_zero: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|g| q_eta(&w, es * g).unwrap()).collect();
    assert!(near_zero.windows(2).all(|x| x[1] < x[0]));
    assert!(near_zero[2] < 1e-5);
    assert!(matches!(q_eta(&w, es), Err(LabError::Precondition(_))));
    assert!(matches!(q_eta(&w, -0.1), Err(LabError::Precondition(_))));
}

#[test]
fn z_eta_tends_to_z_star() {
    let w = reference_wave();
    let es = eta_star(&w).unwrap();
    let zs = z_star(&w);
    let gaps: Vec<f64> = (2..=8).map(|k| (z_eta(&w, es * 2f64.powi(-k)).unwrap() - zs).abs()).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[6] < 0.01 * zs);
}

#[test]
fn z_eta_matches_shooting_oracle() {
    let w = reference_wave();
    let eta = 0.5 * eta_star(&w).unwrap();
    let (z_shoot, q_shoot) = rk4_until_p_zero(w.d, 0.0, |q| w.eval(q), eta, 1e-4);
    assert!((z_eta(&w, eta).unwrap() - z_shoot).abs() < 1e-5);
    assert!((q_eta(&w, eta).unwrap() - q_shoot).abs() < 1e-6);
}

#[test]
fn z_eta_scales_with_root_d() {
    let w = reference_wave();
    let w4 = with_d(&w, 4.0);
    let eta = 0.4 * eta_star(&w).unwrap();
    // η² d is what fixes q^η, so the 4d problem needs η/2
    let q1 = q_eta(&w, eta).unwrap();
    let q4 = q_eta(&w4, 0.5 * eta).unwrap();
    assert!((q1 - q4).abs() < 1e-11);
    let z1 = z_eta(&w, eta).unwrap();
    let z4 = z_eta(&w4, 0.5 * eta).unwrap();
    assert!((z4 - 2.0 * z1).abs() < 1e-8 * z1);
}

#[test]
fn energy_is_conserved_without_drift() {
    let w = reference_wave();
    let eta = 0.7 * eta_star(&w).unwrap();
    let wave = finite_wave(&w, 0.0, eta).unwrap();
    let e0 = 0.5 * w.d * eta * eta;
    for (q, p) in wave.q.iter().zip(&wave.p) {
        let e = 0.5 * w.d * p * p + w.primitive(*q);
        assert!((e - e0).abs() < 1e-8, "energy drift {}", e - e0);
    }
    assert_eq!(wave.q[0], 0.0);
    assert_eq!(wave.p[0], eta);
    assert!(wave.q.windows(2).all(|x| x[1] > x[0]));
    assert!(wave.p.last().unwrap().abs() < 1e-10);
}

#[test]
fn small_speed_perturbation() {
    let w = reference_wave();
    let eta = 0.5 * eta_star(&w).unwrap();
    let still = finite_wave(&w, 0.0, eta).unwrap();
    let moving = finite_wave(&w, 0.05 * eta, eta).unwrap();
    assert!(moving.q_end > still.q_end);
    let n = 200;
    for i in 0..=n {
        let q = still.q_end * i as f64 / n as f64;
        let (p0, ps) = (still.p_of_q(q).unwrap(), moving.p_of_q(q).unwrap());
        assert!(ps >= p0 - 1e-9, "p^s({q}) = {ps} < p^0 = {p0}");
    }
    let gaps: Vec<f64> = [5e-2, 5e-3, 5e-4]
        .iter()
        .map(|f| (finite_wave(&w, f * eta, eta).unwrap().z_end - still.z_end).abs())
        .collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]) && gaps[2] < 1e-3, "{gaps:?}");
}

#[test]
fn finite_wave_guards() {
    let w = reference_wave();
    let es = eta_star(&w).unwrap();
    assert!(finite_wave(&w, 0.0, es * 1.01).is_err());
    assert!(finite_wave(&w, -0.1, 0.5 * es).is_err());
}

/// First zero of v for d v'' = −f(v), v(0) = q0, v'(0) = 0, by fixed-step RK4.
fn landing_oracle(w: &WaveNonlinearity, q0: f64, limit: f64) -> f64 {
    let dz = 1e-3;
    let rhs = |y: [f64; 2]| [y[1], -w.eval(y[0]) / w.d];
    let mut y = [q0, 0.0];
    let mut z = 0.0;
    while z < limit {
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * dz * k1[0], y[1] + 0.5 * dz * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * dz * k2[0], y[1] + 0.5 * dz * k2[1]]);
        let k4 = rhs([y[0] + dz * k3[0], y[1] + dz * k3[1]]);
        let next = [
            y[0] + dz / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dz / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if next[0] <= 0.0 {
            return z + dz * y[0] / (y[0] - next[0]);
        }
        y = next;
        z += dz;
    }
    f64::INFINITY
}

#[test]
fn bvp_threshold_reference() {
    let w = reference_wave();
    let zs = z_star(&w);
    let sol = solve_bvp_critical(&w, 1.2 * zs).unwrap().expect("solution above Z*");
    assert!(sol.height > 0.0 && sol.height < w.theta());
    assert!(sol.v_prime[0].abs() <= 1e-8);
    assert!(sol.v.last().unwrap().abs() <= 1e-8);
    assert!(sol.v[..sol.v.len() - 1].iter().all(|&v| v > 0.0));
    assert!(sol.wave_residual(&w) < 1e-6);
    assert!(solve_bvp_critical(&w, 0.8 * zs).unwrap().is_none());
    // the landing map never comes down to 0.8·Z*
    let theta = w.theta();
    let lowest = (1..400)
        .map(|k| landing_oracle(&w, theta * k as f64 / 400.0, 4.0 * zs))
        .fold(f64::INFINITY, f64::min);
    assert!(lowest > 0.8 * zs && lowest >= zs * (1.0 - 1e-3), "lowest landing {lowest}");
    assert!(matches!(solve_bvp_critical(&w, 0.0), Err(LabError::Precondition(_))));
}

#[test]
fn traveling_fronts() {
    let p = reference(1.0, 0.5);
    let s = 1.1 * speed_upper_bound(&p);
    let pair = traveling_wave(&p, s).unwrap();
    for (front, limit) in [(&pair.phi, p.lambda), (&pair.psi, p.nu + p.c)] {
        assert_eq!(front.q[0], 0.0);
        assert_eq!(front.z[0], 0.0);
        assert!(front.q.windows(2).all(|x| x[1] > x[0]));
        assert!(front.p.iter().all(|&d| d > 0.0));
        assert!((front.terminal() - limit).abs() <= 1e-3 * limit);
    }
    assert!(matches!(traveling_wave(&p, speed_upper_bound(&p)), Err(LabError::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn shooting_agrees_with_quadrature(frac in 0.02f64..0.98) {
        let w = reference_wave();
        let eta = frac * eta_star(&w).unwrap();
        let wave = finite_wave(&w, 0.0, eta).unwrap();
        prop_assert!((wave.q_end - q_eta(&w, eta).unwrap()).abs() < 1e-8);
        prop_assert!((wave.z_end - z_eta(&w, eta).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn q_eta_increasing(a in 0.01f64..0.99, b in 0.01f64..0.99) {
        prop_assume!((a - b).abs() > 1e-6);
        let w = reference_wave();
        let es = eta_star(&w).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(q_eta(&w, lo * es).unwrap() < q_eta(&w, hi * es).unwrap());
    }

    #[test]
    fn bvp_threshold_random(p in arb_regime()) {
        let w = WaveNonlinearity::at_coexistence(&p).unwrap();
        let zs = z_star(&w);
        let sol = solve_bvp_critical(&w, 1.2 * zs).unwrap();
        prop_assert!(sol.is_some());
        let sol = sol.unwrap();
        prop_assert!(sol.v.last().unwrap().abs() <= 1e-8);
        prop_assert!(sol.wave_residual(&w) < 1e-6);
        prop_assert!(solve_bvp_critical(&w, 0.8 * zs).unwrap().is_none());
    }

    #[test]
    fn fronts_above_threshold(p in arb_regime(), factor in 1.01f64..3.0) {
        let pair = traveling_wave(&p, factor * speed_upper_bound(&p)).unwrap();
        prop_assert!(pair.phi.q.windows(2).all(|x| x[1] > x[0]));
        prop_assert!(pair.psi.q.windows(2).all(|x| x[1] > x[0]));
        prop_assert!((pair.phi.terminal() - p.lambda).abs() <= 1e-3 * p.lambda);
        prop_assert!((pair.psi.terminal() - p.nu - p.c).abs() <= 1e-3 * (p.nu + p.c));
    }
}

#[test]
fn bvp_found_when_nonlinearity_bends_near_zero() {
    // u* ≈ 0.085, so f′ falls from ν + c to about ν within q ≈ 0.03
    let p = ModelParams {
        lambda: 0.5532168231638679,
        b: 1.1863287920754135,
        m: 2.5066585908406283,
        d: 4.3973576667987295,
        nu: 3.1968138395576253,
        c: 4.677409255726823,
        mu: 1.0,
        rho: 1.0,
        h0: 0.5,
    };
    let w = WaveNonlinearity::at_coexistence(&p).unwrap();
    let zs = z_star(&w);
    let sol = solve_bvp_critical(&w, 1.2 * zs).unwrap().expect("solution above Z*");
    assert!(sol.height < 0.05 * w.theta());
    assert!(sol.v.last().unwrap().abs() <= 1e-8);
    assert!(sol.wave_residual(&w) < 1e-6);
}
