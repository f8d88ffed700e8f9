#![allow(dead_code)]

//! Independent reference values: the closed-form radial Gelfand family in
//! the plane and a radial shooting integrator.

/// `u_b(r) = 2 ln((1 + b) / (1 + b r^2))`, solving `-Lap u = lambda(b) e^u`
/// in the unit disc.
pub fn gelfand2_u(b: f64, r: f64) -> f64 {
    2.0 * ((1.0 + b) / (1.0 + b * r * r)).ln()
}

pub fn gelfand2_lambda(b: f64) -> f64 {
    8.0 * b / (1.0 + b).powi(2)
}

/// Both roots `b` of `lambda(b) = lambda`, smaller first.
pub fn gelfand2_roots(lambda: f64) -> (f64, f64) {
    // lambda b^2 + (2 lambda - 8) b + lambda = 0
    let p = (8.0 - 2.0 * lambda) / (2.0 * lambda);
    let d = (p * p - 1.0).sqrt();
    (p - d, p + d)
}

/// Centre values of the two solutions at `lambda`.
pub fn gelfand2_centers(lambda: f64) -> (f64, f64) {
    let (a, b) = gelfand2_roots(lambda);
    (2.0 * (1.0 + a).ln(), 2.0 * (1.0 + b).ln())
}

/// `w'' + (N-1)/s w' = -e^w`, `w(0) = w'(0) = 0`, by RK4 up to `s_max`.
/// Returns `(s, w)` samples every `step`.
pub fn emden_profile(n: usize, s_max: f64, step: f64) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let s0 = 1e-3;
    // series start
    let mut w = -s0 * s0 / (2.0 * nf) + s0.powi(4) / (8.0 * nf * (nf + 2.0));
    let mut dw = -s0 / nf + s0.powi(3) / (2.0 * nf * (nf + 2.0));
    let mut s = s0;
    let rhs = |s: f64, w: f64, dw: f64| (dw, -(nf - 1.0) / s * dw - w.exp());
    let mut out = vec![(0.0, 0.0), (s, w)];
    while s < s_max {
        let (k1a, k1b) = rhs(s, w, dw);
        let (k2a, k2b) = rhs(s + 0.5 * step, w + 0.5 * step * k1a, dw + 0.5 * step * k1b);
        let (k3a, k3b) = rhs(s + 0.5 * step, w + 0.5 * step * k2a, dw + 0.5 * step * k2b);
        let (k4a, k4b) = rhs(s + step, w + step * k3a, dw + step * k3b);
        w += step / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        dw += step / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        s += step;
        out.push((s, w));
    }
    out
}

/// Extremal parameter of `-Lap u = lambda e^u` in the unit ball by
/// shooting: `u(r) = a + w(r rho)` with `rho^2 = lambda e^a` vanishes at
/// `r = 1` when `a = -w(rho)`, so `lambda = rho^2 e^(w(rho))`.
pub fn shooting_lambda_star(n: usize) -> f64 {
    emden_profile(n, 12.0, 1e-4)
        .into_iter()
        .map(|(s, w)| s * s * w.exp())
        .fold(0.0, f64::max)
}

/// Parameter values `lambda(rho)` along the whole solution curve.
pub fn shooting_curve(n: usize, s_max: f64) -> Vec<(f64, f64)> {
    emden_profile(n, s_max, 1e-3).into_iter().map(|(s, w)| (s * s * w.exp(), -w)).collect()
}
