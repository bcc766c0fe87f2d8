//! Small numerical kernels shared by the solver and the phase-plane tools.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod tridiag;

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid_uniform(samples: &[f64], spacing: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
