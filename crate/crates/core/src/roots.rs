//! Safeguarded Newton iteration for monotone scalar equations.

/// Root of `g` on `[lo, hi]` where `g(lo) <= 0 <= g(hi)`.
///
/// Newton steps that leave the bracket or fail to halve it fall back to
/// bisection. Stops when the bracket is narrower than `rel_tol * |x|` or after
/// 200 iterations.
pub fn newton_bisect(g: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    debug_assert!(lo <= hi);
    let (glo, _) = g(lo);
    if glo >= 0.0 {
        return lo;
    }
    let (ghi, _) = g(hi);
    if ghi <= 0.0 {
        return hi;
    }
    let mut x = 0.5 * (lo + hi);
    let mut prev_width = hi - lo;
    for _ in 0..200 {
        let (gx, dgx) = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= rel_tol * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = if dgx > 0.0 { x - gx / dgx } else { f64::NAN };
        if newton > lo && newton < hi && (newton - x).abs() <= rel_tol * x.abs() {
            return newton;
        }
        // Bisect when Newton leaves the bracket or the bracket stalls.
        x = if newton > lo && newton < hi && width <= 0.5 * prev_width {
            newton
        } else {
            0.5 * (lo + hi)
        };
        prev_width = width;
    }
    x
}

/// Unique nonnegative root of `a f^3 + b f^2 = rhs` for `a, b >= 0`, `a + b > 0`, `rhs >= 0`.
pub fn cubic_root(a: f64, b: f64, rhs: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0 && a + b > 0.0);
    if rhs <= 0.0 {
        return 0.0;
    }
    // Each term alone bounds the root from above.
    let by_cubic = if a > 0.0 { (rhs / a).cbrt() } else { f64::INFINITY };
    let by_square = if b > 0.0 { (rhs / b).sqrt() } else { f64::INFINITY };
    let hi = by_cubic.min(by_square);
    let g = |f: f64| (a * f * f * f + b * f * f - rhs, 3.0 * a * f * f + 2.0 * b * f);
    newton_bisect(g, 0.0, hi, 1e-14)
}
