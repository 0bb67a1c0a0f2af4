//! Curve fits used by the calibration and benchmarking routines.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::golden_min;

/// `offset + amplitude * cos(2 pi frequency t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SineFit {
    /// Cycles per unit of `t` (GHz for `t` in ns).
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Peak-to-peak swing, `2 * amplitude`.
    pub contrast: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

impl SineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t + self.phase).cos()
    }
}

/// Solves the small normal-equation system `A x = b` (Gaussian elimination, partial pivoting).
fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Linear least squares on the basis functions `phi(x_i)`; returns coefficients and the residual sum of squares.
fn linear_lsq<const N: usize>(xs: &[f64], ys: &[f64], phi: impl Fn(f64) -> [f64; N]) -> Option<([f64; N], f64)> {
    let mut ata = [[0.0; N]; N];
    let mut atb = [0.0; N];
    for (&x, &y) in xs.iter().zip(ys) {
        let f = phi(x);
        for i in 0..N {
            atb[i] += f[i] * y;
            for j in 0..N {
                ata[i][j] += f[i] * f[j];
            }
        }
    }
    let c = solve_small(ata, atb)?;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = phi(x);
            let m: f64 = (0..N).map(|i| c[i] * f[i]).sum();
            (y - m).powi(2)
        })
        .sum();
    Some((c, rss))
}

fn sine_rss(t: &[f64], y: &[f64], f: f64) -> (f64, [f64; 3]) {
    let w = 2.0 * std::f64::consts::PI * f;
    match linear_lsq(t, y, |x| [1.0, (w * x).cos(), (w * x).sin()]) {
        Some((c, rss)) => (rss, c),
        None => (f64::INFINITY, [0.0; 3]),
    }
}

/// Single-frequency sinusoid fit by variable projection.
///
/// The frequency is scanned on a grid from one cycle per window up to
/// `f_max` (four points per resolvable bin) and refined by golden section;
/// amplitude, phase and offset are solved linearly at each trial frequency.
/// Fails when the fitted contrast is below `min_contrast`.
pub fn fit_sinusoid(t: &[f64], y: &[f64], f_max: f64, min_contrast: f64) -> Result<SineFit> {
    if t.len() != y.len() || t.len() < 5 {
        return Err(Error::FitFailed { reason: "sinusoid fit needs at least five samples".into() });
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) || !(f_max > 0.0) {
        return Err(Error::FitFailed { reason: "empty time span or frequency range".into() });
    }
    let f_min = 1.0 / span;
    if f_max <= f_min {
        return Err(Error::FitFailed { reason: "window shorter than one period at f_max".into() });
    }
    let n = (((f_max - f_min) * span / 0.25).ceil() as usize).max(8);
    let grid: Vec<f64> = (0..=n).map(|k| f_min + (f_max - f_min) * k as f64 / n as f64).collect();
    let rss: Vec<f64> = grid.iter().map(|&f| sine_rss(t, y, f).0).collect();
    let best = (0..=n).min_by(|&i, &j| rss[i].total_cmp(&rss[j])).unwrap();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(n)];
    let (f, _) = golden_min(|f| sine_rss(t, y, f).0, lo, hi, 1e-10 * f_max.max(1.0));
    let (rss, c) = sine_rss(t, y, f);
    let amplitude = c[1].hypot(c[2]);
    let fit = SineFit {
        frequency: f,
        amplitude,
        phase: (-c[2]).atan2(c[1]),
        offset: c[0],
        contrast: 2.0 * amplitude,
        rms: (rss / t.len() as f64).sqrt(),
    };
    if fit.contrast < min_contrast {
        return Err(Error::FitFailed { reason: format!("oscillation contrast {:.3e} below {min_contrast}", fit.contrast) });
    }
    Ok(fit)
}

/// `A p^d + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

impl DecayFit {
    pub fn eval(&self, d: f64) -> f64 {
        self.a * self.p.powf(d) + self.b
    }
}

fn decay_rss(d: &[f64], y: &[f64], p: f64, offset: Option<f64>) -> (f64, [f64; 2]) {
    let fit = match offset {
        None => linear_lsq(d, y, |x| [p.powf(x), 1.0]),
        Some(b) => {
            let shifted: Vec<f64> = y.iter().map(|v| v - b).collect();
            linear_lsq(d, &shifted, |x| [p.powf(x)]).map(|(c, r)| ([c[0], b], r))
        }
    };
    fit.map_or((f64::INFINITY, [0.0; 2]), |(c, rss)| (rss, c))
}

/// Least-squares fit of `A p^d + B` with `p` in `[0, 1]` (variable projection on `p`).
pub fn fit_exp_decay(d: &[f64], y: &[f64]) -> Result<DecayFit> {
    fit_exp_decay_with(d, y, None)
}

/// [`fit_exp_decay`] with `B` optionally held fixed.
pub fn fit_exp_decay_with(d: &[f64], y: &[f64], offset: Option<f64>) -> Result<DecayFit> {
    let needed = if offset.is_some() { 2 } else { 3 };
    if d.len() != y.len() || d.len() < needed {
        return Err(Error::FitFailed { reason: format!("decay fit needs at least {needed} depths") });
    }
    let n = 200;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let rss: Vec<f64> = grid.iter().map(|&p| decay_rss(d, y, p, offset).0).collect();
    let best = (0..=n).filter(|&i| rss[i].is_finite()).min_by(|&i, &j| rss[i].total_cmp(&rss[j]));
    let Some(best) = best else {
        return Err(Error::FitFailed { reason: "depths do not determine the decay".into() });
    };
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(n)];
    let (mut p, mut r) = golden_min(|p| decay_rss(d, y, p, offset).0, lo, hi, 1e-12);
    if !(r <= rss[best]) {
        p = grid[best];
        r = rss[best];
    }
    let (_, c) = decay_rss(d, y, p, offset);
    Ok(DecayFit { a: c[0], p, b: c[1], rms: (r / d.len() as f64).sqrt() })
}

/// Accumulated leakage `L(d) = eps (1 - lambda^d) / (1 - lambda)`, the
/// steady approach of a per-cycle leakage `eps` with return factor `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageFit {
    /// Population leaked per cycle.
    pub per_cycle: f64,
    pub lambda: f64,
    pub rms: f64,
}

fn leak_basis(lambda: f64, d: f64) -> f64 {
    if (1.0 - lambda).abs() < 1e-12 {
        d
    } else {
        (1.0 - lambda.powf(d)) / (1.0 - lambda)
    }
}

/// Fit of [`LeakageFit`] with `lambda` in `[0, 1]`.
pub fn fit_leakage(d: &[f64], y: &[f64]) -> Result<LeakageFit> {
    if d.len() != y.len() || d.len() < 2 {
        return Err(Error::FitFailed { reason: "leakage fit needs at least two depths".into() });
    }
    let rss = |lambda: f64| match linear_lsq(d, y, |x| [leak_basis(lambda, x)]) {
        Some((c, r)) => (r, c[0]),
        None => (f64::INFINITY, 0.0),
    };
    let n = 200;
    let best = (0..=n).map(|k| k as f64 / n as f64).min_by(|&a, &b| rss(a).0.total_cmp(&rss(b).0)).unwrap();
    let (lambda, _) = golden_min(|l| rss(l).0, (best - 1.0 / n as f64).max(0.0), (best + 1.0 / n as f64).min(1.0), 1e-12);
    let (r, eps) = rss(lambda);
    Ok(LeakageFit { per_cycle: eps, lambda, rms: (r / d.len() as f64).sqrt() })
}

/// Central `level` interval of `samples` (percentile bootstrap).
pub fn percentile_interval(samples: &mut [f64], level: f64) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let q = |f: f64| {
        let x = f * (n - 1) as f64;
        let (i, frac) = (x.floor() as usize, x - x.floor());
        if i + 1 < n {
            samples[i] * (1.0 - frac) + samples[i + 1] * frac
        } else {
            samples[n - 1]
        }
    };
    let tail = 0.5 * (1.0 - level);
    (q(tail), q(1.0 - tail))
}

/// Resamples each depth's per-circuit values with replacement and refits.
///
/// Returns one fitted value of `stat` per successful replicate.
pub fn bootstrap<R: Rng, T>(
    rng: &mut R,
    depths: &[f64],
    per_depth: &[Vec<f64>],
    replicates: usize,
    mut fit: impl FnMut(&[f64], &[f64]) -> Result<T>,
    stat: impl Fn(&T) -> f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let means: Vec<f64> = per_depth
            .iter()
            .map(|v| {
                let n = v.len();
                (0..n).map(|_| v[rng.random_range(0..n)]).sum::<f64>() / n as f64
            })
            .collect();
        if let Ok(f) = fit(depths, &means) {
            out.push(stat(&f));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sinusoid_recovers_parameters() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = t.iter().map(|&x| 0.5 + 0.48 * (2.0 * std::f64::consts::PI * 0.0371 * x + 0.3).cos()).collect();
        let f = fit_sinusoid(&t, &y, 1.0, 0.1).unwrap();
        assert_relative_eq!(f.frequency, 0.0371, max_relative = 1e-8);
        assert_relative_eq!(f.amplitude, 0.48, max_relative = 1e-8);
        assert_relative_eq!(f.phase, 0.3, epsilon = 1e-7);
        assert!(f.rms < 1e-9);
    }

    #[test]
    fn flat_signal_fails() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| 1.0 + 1e-3 * (x * 0.7).sin()).collect();
        assert!(matches!(fit_sinusoid(&t, &y, 0.5, 0.1), Err(Error::FitFailed { .. })));
    }

    #[test]
    fn decay_recovers_parameters() {
        let d: Vec<f64> = [1, 2, 4, 8, 16, 32, 64, 100].iter().map(|&x| x as f64).collect();
        let y: Vec<f64> = d.iter().map(|&x| 0.9 * 0.985f64.powf(x) + 0.02).collect();
        let f = fit_exp_decay(&d, &y).unwrap();
        assert_relative_eq!(f.p, 0.985, epsilon = 1e-9);
        assert_relative_eq!(f.a, 0.9, epsilon = 1e-7);
        assert_relative_eq!(f.b, 0.02, epsilon = 1e-7);
    }

    #[test]
    fn fixed_offset_decay() {
        let d = [1.0, 4.0, 9.0, 30.0];
        let y: Vec<f64> = d.iter().map(|&x| 0.97 * 0.995f64.powf(x)).collect();
        let f = fit_exp_decay_with(&d, &y, Some(0.0)).unwrap();
        assert_relative_eq!(f.p, 0.995, epsilon = 1e-9);
        assert_eq!(f.b, 0.0);
    }

    #[test]
    fn decay_of_constant_curve_is_unity() {
        let d = [1.0, 5.0, 10.0, 20.0];
        let f = fit_exp_decay(&d, &[1.0; 4]).unwrap();
        assert!(f.rms < 1e-12);
        assert_relative_eq!(f.eval(7.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn leakage_accumulation() {
        let d: Vec<f64> = (1..=10).map(|x| (x * 10) as f64).collect();
        let y: Vec<f64> = d.iter().map(|&x| 0.0026 * leak_basis(0.97, x)).collect();
        let f = fit_leakage(&d, &y).unwrap();
        assert_relative_eq!(f.per_cycle, 0.0026, max_relative = 1e-6);
        assert_relative_eq!(f.lambda, 0.97, epsilon = 1e-8);
    }

    #[test]
    fn percentile_bounds() {
        let mut v: Vec<f64> = (0..101).map(|x| x as f64).collect();
        let (lo, hi) = percentile_interval(&mut v, 0.68);
        assert_relative_eq!(lo, 16.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 84.0, epsilon = 1e-12);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let depths = [1.0, 10.0, 30.0];
        let per: Vec<Vec<f64>> = depths.iter().map(|&d| vec![0.98f64.powf(d) + 0.01, 0.98f64.powf(d) - 0.01]).collect();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            bootstrap(&mut rng, &depths, &per, 20, fit_exp_decay, |f| f.p)
        };
        assert_eq!(run(3), run(3));
        assert_eq!(run(3).len(), 20);
    }

    proptest! {
        #[test]
        fn decay_fit_is_exact_on_model_curves(p in 0.5f64..0.999, a in 0.2f64..1.0, b in 0.0f64..0.2) {
            let d: Vec<f64> = [1.0, 3.0, 7.0, 15.0, 30.0, 60.0].to_vec();
            let y: Vec<f64> = d.iter().map(|&x| a * p.powf(x) + b).collect();
            let f = fit_exp_decay(&d, &y).unwrap();
            prop_assert!((f.p - p).abs() < 1e-6);
        }
    }
}
