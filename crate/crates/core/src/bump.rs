//! Smooth cutoff functions.

/// `exp(-1/t)` for `t > 0`, zero otherwise.
#[inline]
fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = flat_exp(t);
    let b = flat_exp(1.0 - t);
    a / (a + b)
}

/// Radial profile equal to 1 for `r <= inner` and 0 for `r >= outer`.
#[inline]
pub fn plateau(r: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smooth_step((r.abs() - inner) / (outer - inner))
}

/// Littlewood-Paley base: 1 on `|y| <= 1`, 0 on `|y| >= 2`.
#[inline]
pub fn lp_base(r: f64) -> f64 {
    plateau(r, 1.0, 2.0)
}

/// `exp(-1/(1-t^2))` on `(-1, 1)`, zero outside.
#[inline]
pub fn compact_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// `sin(t)/t` with the removable singularity filled in.
#[inline]
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// `(1 + |x|^2)^{1/2}`.
#[inline]
pub fn japanese(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
