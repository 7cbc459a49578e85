//! Bracketed scalar root finding (Brent's method).

/// Outcome of a Brent iteration. `bracket` holds the final sign-change
/// interval, ordered low to high.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentRoot {
    pub root: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
}

/// Find a root of `f` in `[a, b]` given `fa = f(a)` and `fb = f(b)` of
/// opposite sign (or one of them zero).
///
/// Stops when `|f| <= ftol`, when the bracket half-width drops below
/// `2 eps |b| + xtol / 2`, or after `max_iter` evaluations (returned with
/// `converged = false`).
#[allow(clippy::too_many_arguments)]
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, ftol: f64, max_iter: usize) -> BrentRoot
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(fa * fb <= 0.0, "root not bracketed");
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa == 0.0 {
        return done(a, fa, (a, a), 0, true);
    }
    if fb == 0.0 {
        return done(b, fb, (b, b), 0, true);
    }

    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= ftol {
            return done(b, fb, ordered(b, c), iter - 1, true);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    done(b, fb, ordered(b, c), max_iter, false)
}

fn ordered(x: f64, y: f64) -> (f64, f64) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

fn done(root: f64, value: f64, bracket: (f64, f64), iterations: usize, converged: bool) -> BrentRoot {
    BrentRoot {
        root,
        value,
        bracket,
        iterations,
        converged,
    }
}
