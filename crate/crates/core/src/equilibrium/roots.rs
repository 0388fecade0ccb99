use crate::game::PolyLatency;

const MAX_BISECTIONS: usize = 200;

/// Root of a nondecreasing function on `[lo, hi]` given `f(lo) <= 0 <= f(hi)`.
/// Returns the upper end of the final bracket.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest `x` in `[0, cap]` with `poly(offset + x) >= level`, or `cap` when
/// no such point exists. `poly` must be nonconstant (strictly increasing).
pub(crate) fn invert(poly: &PolyLatency, offset: f64, level: f64, cap: f64) -> f64 {
    if poly.eval(offset) >= level {
        return 0.0;
    }
    if poly.eval(offset + cap) <= level {
        return cap;
    }
    // Newton from the right converges monotonically for convex increasing maps.
    let mut x = cap;
    for _ in 0..100 {
        let v = poly.eval(offset + x) - level;
        let d = poly.derivative(offset + x);
        if v <= 0.0 || !(d > 0.0) {
            break;
        }
        let next = x - v / d;
        if !(next < x) || next < 0.0 {
            break;
        }
        if x - next <= 1e-15 * (1.0 + x) {
            x = next;
            break;
        }
        x = next;
    }
    // tidy up with bisection on a tight bracket around the Newton iterate
    let g = |y: f64| poly.eval(offset + y) - level;
    let (mut lo, mut hi) = if g(x) >= 0.0 {
        let step = (1e-12 * (1.0 + x)).max(f64::EPSILON);
        ((x - step).max(0.0), x)
    } else {
        (x, cap)
    };
    if g(lo) >= 0.0 {
        lo = 0.0;
    }
    if g(hi) < 0.0 {
        hi = cap;
    }
    bisect(lo, hi, g)
}
