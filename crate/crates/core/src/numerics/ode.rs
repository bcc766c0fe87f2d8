//! Dormand–Prince 5(4) integrator for planar systems, with terminal
//! event location by bracketed secant refinement.

use crate::error::{LabError, Result};

/// A point of a planar first-order system.
pub type Planar = [f64; 2];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Outcome of an event-terminated integration.
#[derive(Debug, Clone)]
pub struct Path {
    pub z: Vec<f64>,
    pub y: Vec<Planar>,
    /// Location of the terminal event, if it fired. Also the last sample.
    pub event: Option<(f64, Planar)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Absolute tolerance on the event location.
    pub event_tol: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-11,
            atol: 1e-13,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 500_000,
            event_tol: 1e-12,
        }
    }
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            ..Default::default()
        }
    }

    /// A single explicit step of size `h`; returns the 5th-order update and
    /// the scaled error norm.
    pub fn single_step<F: Fn(f64, &Planar) -> Planar>(&self, f: &F, z: f64, y: &Planar, h: f64) -> (Planar, f64) {
        let mut k = [[0.0; 2]; 7];
        k[0] = f(z, y);
        for s in 1..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = f(z + C[s] * h, &ys);
        }
        let mut y_new = *y;
        for (j, kj) in k.iter().enumerate().take(6) {
            y_new[0] += h * A[6][j] * kj[0];
            y_new[1] += h * A[6][j] * kj[1];
        }
        let mut acc = 0.0;
        for i in 0..2 {
            let err: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            acc += (err / scale).powi(2);
        }
        (y_new, (acc / 2.0).sqrt())
    }

    fn next_h(h: f64, err: f64) -> f64 {
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h * fac
    }

    /// Integrates forward from `z0` until `event(y)` changes from positive to
    /// non-positive, or until `z_limit` is reached.
    pub fn integrate_until<F, G>(&self, f: F, z0: f64, y0: Planar, z_limit: f64, event: G) -> Result<Path>
    where
        F: Fn(f64, &Planar) -> Planar,
        G: Fn(&Planar) -> f64,
    {
        let mut path = Path {
            z: vec![z0],
            y: vec![y0],
            event: None,
        };
        let (mut z, mut y) = (z0, y0);
        let mut g = event(&y);
        let mut h = self.h_init.min(self.h_max).min(z_limit - z0);
        for _ in 0..self.max_steps {
            if z >= z_limit {
                return Ok(path);
            }
            h = h.min(z_limit - z).min(self.h_max);
            let (y_new, err) = self.single_step(&f, z, &y, h);
            if !(err <= 1.0) || !y_new.iter().all(|v| v.is_finite()) {
                if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
                    h *= 0.2;
                } else {
                    h = Self::next_h(h, err).min(h * 0.9);
                }
                if h < 1e-14 * z.abs().max(1.0) {
                    return Err(LabError::Numerical(format!("step size underflow at z = {z}")));
                }
                continue;
            }
            let g_new = event(&y_new);
            if g > 0.0 && g_new <= 0.0 {
                let (tau, y_ev) = self.locate(&f, z, &y, h, g, g_new, &event);
                path.z.push(z + tau);
                path.y.push(y_ev);
                path.event = Some((z + tau, y_ev));
                return Ok(path);
            }
            z += h;
            y = y_new;
            g = g_new;
            path.z.push(z);
            path.y.push(y);
            h = Self::next_h(h, err);
        }
        Err(LabError::Numerical(format!(
            "integrator exceeded {} steps (reached z = {z})",
            self.max_steps
        )))
    }

    /// Illinois-modified secant on the step length from the last accepted state.
    fn locate<F, G>(&self, f: &F, z: f64, y: &Planar, h: f64, g0: f64, g1: f64, event: &G) -> (f64, Planar)
    where
        F: Fn(f64, &Planar) -> Planar,
        G: Fn(&Planar) -> f64,
    {
        let (mut a, mut ga) = (0.0, g0);
        let (mut b, mut gb) = (h, g1);
        let mut yb = self.single_step(f, z, y, h).0;
        let mut side = 0i8;
        for _ in 0..200 {
            if (b - a).abs() <= self.event_tol || gb == 0.0 {
                break;
            }
            let mut t = (a * gb - b * ga) / (gb - ga);
            if !(t > a && t < b) {
                t = 0.5 * (a + b);
            }
            let yt = self.single_step(f, z, y, t).0;
            let gt = event(&yt);
            if gt > 0.0 {
                a = t;
                ga = gt;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            } else {
                b = t;
                gb = gt;
                yb = yt;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
            if gt.abs() < 1e-300 {
                break;
            }
        }
        (b, yb)
    }

    /// Integrates from `z0` to exactly `z1` (forward).
    pub fn integrate_to<F: Fn(f64, &Planar) -> Planar>(&self, f: F, z0: f64, y0: Planar, z1: f64) -> Result<Planar> {
        let path = self.integrate_until(f, z0, y0, z1, |_| 1.0)?;
        let last = *path.z.last().unwrap();
        if (last - z1).abs() > 1e-12 * z1.abs().max(1.0) {
            return Err(LabError::Internal(format!("integration stopped at {last} instead of {z1}")));
        }
        Ok(*path.y.last().unwrap())
    }

    /// Solution sampled at the (increasing) abscissae `zs`, starting from `y0` at `zs[0]`.
    pub fn sample<F: Fn(f64, &Planar) -> Planar>(&self, f: F, y0: Planar, zs: &[f64]) -> Result<Vec<Planar>> {
        let mut out = Vec::with_capacity(zs.len());
        let mut y = y0;
        out.push(y);
        for w in zs.windows(2) {
            y = self.integrate_to(&f, w[0], y, w[1])?;
            out.push(y);
        }
        Ok(out)
    }
}
