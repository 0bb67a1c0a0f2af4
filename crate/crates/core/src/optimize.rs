//! Scalar root finding and derivative-free minimization.

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Brent's method for a root of `f` in `[a, b]`; `f(a)` and `f(b)` must differ in sign.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Evaluate `f` on `n` evenly spaced points and refine the best one by
/// golden section between its neighbours. Returns `(x, f(x), at_edge)`
/// where `at_edge` flags a grid minimum on the boundary.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, xtol: f64) -> (f64, f64, bool) {
    assert!(n >= 3, "grid needs at least three points");
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = (0..n)
        .filter(|&i| vals[i].is_finite())
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap_or(0);
    let at_edge = best == 0 || best == n - 1;
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let (x, fx) = golden_min(&mut f, a, b, xtol);
    if fx <= vals[best] {
        (x, fx, at_edge)
    } else {
        (xs[best], vals[best], at_edge)
    }
}

/// All sign changes of `f` over an evenly spaced grid, polished with Brent.
pub fn all_roots<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, xtol: f64) -> Vec<f64> {
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..n - 1 {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
        } else if vals[i].signum() != vals[i + 1].signum() && vals[i + 1] != 0.0 {
            if let Some(r) = brent_root(&mut f, xs[i], xs[i + 1], xtol, 200) {
                roots.push(r);
            }
        }
    }
    if vals[n - 1] == 0.0 {
        roots.push(xs[n - 1]);
    }
    roots
}

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct Simplex {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Nelder-Mead minimization starting from `x0` with initial step sizes `step`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], ftol: f64, max_eval: usize) -> Simplex {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let centroid = |pts: &[Vec<f64>], skip: usize| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (k, p) in pts.iter().enumerate() {
            if k != skip {
                for i in 0..n {
                    c[i] += p[i] / n as f64;
                }
            }
        }
        c
    };
    let along = |c: &[f64], p: &[f64], t: f64| -> Vec<f64> { (0..n).map(|i| c[i] + t * (p[i] - c[i])).collect() };
    while evals < max_eval {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&k| pts[k].clone()).collect();
        vals = order.iter().map(|&k| vals[k]).collect();
        if (vals[n] - vals[0]).abs() <= ftol {
            break;
        }
        let c = centroid(&pts, n);
        let xr = along(&c, &pts[n], -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(&c, &pts[n], -2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let outside = fr < vals[n];
            let xc = if outside { along(&c, &pts[n], -0.5) } else { along(&c, &pts[n], 0.5) };
            let fc = f(&xc);
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for k in 1..=n {
                    pts[k] = along(&pts[0], &pts[k], 0.5);
                    vals[k] = f(&pts[k]);
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { x: pts[best].clone(), f: vals[best], evaluations: evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 3.0, 1e-14, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn golden_quadratic() {
        let (x, fx) = golden_min(|x| (x - 0.3).powi(2) - 1.0, -2.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx + 1.0).abs() < 1e-15);
        let (x, _) = golden_min(|x| (x - 0.3).powi(2), -2.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-10);
    }

    #[test]
    fn grid_flags_edge() {
        let (_, _, edge) = grid_then_golden(|x| x, 0.0, 1.0, 11, 1e-8);
        assert!(edge);
        let (x, _, edge) = grid_then_golden(|x| (x - 0.55).abs(), 0.0, 1.0, 11, 1e-10);
        assert!(!edge);
        assert!((x - 0.55).abs() < 1e-8);
    }

    #[test]
    fn roots_of_sine() {
        let r = all_roots(f64::sin, 0.5, 10.0, 50, 1e-13);
        assert_eq!(r.len(), 3);
        for (k, x) in r.iter().enumerate() {
            assert!((x - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-10);
        }
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let s = nelder_mead(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            1e-16,
            5000,
        );
        assert!((s.x[0] - 1.0).abs() < 1e-4 && (s.x[1] - 1.0).abs() < 1e-4, "{:?}", s);
    }
}
