//! Bounded scalar minimization (Brent's method: golden-section steps with
//! parabolic interpolation).

/// Outcome of a bounded search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    /// The bracket shrank below tolerance within the iteration budget and
    /// every evaluated objective value was finite.
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 − √5) / 2

/// Minimizes `f` on `[lo, hi]`.
///
/// Terminates once the bracket around the current best point is narrower
/// than `2·(tol·|x| + tol)`, or after `max_iter` iterations.
pub(crate) fn brent_min<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut finite = fx.is_finite();
    let mut d = 0.0f64;
    let mut e = 0.0f64;

    for iter in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = tol * x.abs() + tol;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum {
                x,
                fx,
                iterations: iter,
                converged: finite,
            };
        }

        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        if !fu.is_finite() {
            finite = false;
        }

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Minimum {
        x,
        fx,
        iterations: max_iter,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let m = brent_min(|x| (x - 1.3).powi(2) + 2.0, 0.0, 5.0, 1e-10, 200);
        assert!(m.converged);
        // Location is only resolvable to about √ε near a quadratic minimum.
        assert!((m.x - 1.3).abs() < 1e-7);
        assert!((m.fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_minimum_approaches_edge() {
        let m = brent_min(|x| x, 0.0, 1.0, 1e-10, 200);
        assert!(m.converged);
        assert!(m.x < 1e-8);
    }

    #[test]
    fn non_smooth_objective() {
        let m = brent_min(|x: f64| (x - 0.7).abs(), -2.0, 3.0, 1e-10, 200);
        assert!(m.converged);
        assert!((m.x - 0.7).abs() < 1e-8);
    }

    #[test]
    fn zero_budget_never_converges() {
        let m = brent_min(|x| x * x, -1.0, 1.0, 1e-8, 0);
        assert!(!m.converged);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn non_finite_objective_is_not_converged() {
        let m = brent_min(
            |x: f64| if x > 0.9 { f64::NAN } else { (x - 0.95).powi(2) },
            -1.0,
            1.0,
            1e-8,
            200,
        );
        assert!(!m.converged);
    }
}
