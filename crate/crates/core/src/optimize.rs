//! One-dimensional minimization on the prediction interval.

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_iter`
/// iterations. Only interior points are evaluated, so `f` may be infinite at
/// the bracket ends. Returns `(x_min, f_min)`.
pub fn golden_section(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Uniform grid scan on `[0, 1]` with `resolution` points followed by a
/// golden-section refinement inside the cell pair around the best grid point.
///
/// Ties on the grid go to the smallest argument. The refined point replaces the
/// grid point only when it is strictly better.
pub fn grid_then_refine(
    f: impl Fn(f64) -> f64,
    resolution: usize,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let resolution = resolution.max(2);
    let step = 1.0 / (resolution - 1) as f64;
    let mut best = (0.0, f(0.0));
    for i in 1..resolution {
        let x = i as f64 * step;
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let lo = (best.0 - step).max(0.0);
    let hi = (best.0 + step).min(1.0);
    let refined = golden_section(&f, lo, hi, tol, max_iter);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_quadratic_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-10);
        assert!(fx < 1e-20);
    }

    #[test]
    fn golden_tolerates_infinite_endpoints() {
        let f = |x: f64| -(x.ln()) - (1.0 - x).ln();
        let (x, _) = golden_section(f, 0.0, 1.0, 1e-12, 200);
        // argmin resolution is limited to about sqrt(machine epsilon)
        assert!((x - 0.5).abs() < 1e-6);
    }

    #[test]
    fn golden_respects_iteration_cap() {
        let (x, _) = golden_section(|x| x, 0.0, 1.0, 0.0, 3);
        assert!(x > 0.0 && x < 0.5);
    }

    #[test]
    fn grid_breaks_ties_toward_smallest_argument() {
        let (x, fx) = grid_then_refine(|_| 1.0, 11, 1e-12, 200);
        assert_eq!(x, 0.0);
        assert_eq!(fx, 1.0);
    }

    #[test]
    fn grid_handles_nonconvex_function() {
        // two wells, the deeper one near 0.8
        let f = |x: f64| ((x - 0.2).powi(2) + 0.1).min((x - 0.8).powi(2));
        let (x, _) = grid_then_refine(f, 1001, 1e-12, 200);
        assert!((x - 0.8).abs() < 1e-8);
    }
}
