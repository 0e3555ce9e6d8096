//! Distances, goodness-of-fit tests, Laplace-functional comparisons and
//! convergence trends. Every comparison carries a confidence interval.

use bralev_core::stats::{Estimate, MeanAccumulator};
use bralev_core::{PointMeasure, TestFunction};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// p-value below which a goodness-of-fit test fails.
pub const P_VALUE_FLOOR: f64 = 0.01;

/// Smallest expected count per bin after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

/// Standard deviation of `√n · D_n` under the null, for large `n`.
const KS_SCALED_SD: f64 = 0.2603;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{0}")]
    Shape(String),
}

/// Kolmogorov–Smirnov distance between the samples and
/// `m + (1 - m) F`, where `m` is the mass placed at `-∞`.
///
/// `-∞` samples are counted in that atom.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, mass_at_minus_inf: f64) -> Result<f64, VerifyError> {
    if samples.len() < 100 {
        return Err(VerifyError::TooFewSamples {
            needed: 100,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let atom = sorted.iter().take_while(|x| **x == f64::NEG_INFINITY).count();
    let m = mass_at_minus_inf;
    let mut d = (atom as f64 / n - m).abs();
    for (i, &x) in sorted.iter().enumerate().skip(atom) {
        let f = m + (1.0 - m) * cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Kolmogorov–Smirnov distance for draws of `max(X, a)` against the law
/// `F` of `X`. The atom at `a` carries `F(a)`.
pub fn ks_distance_censored<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, a: f64) -> Result<f64, VerifyError> {
    if samples.len() < 100 {
        return Err(VerifyError::TooFewSamples {
            needed: 100,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let atom = sorted.iter().take_while(|x| **x <= a).count();
    let mut d = (atom as f64 / n - cdf(a)).abs();
    for (i, &x) in sorted.iter().enumerate().skip(atom) {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Approximate standard error of a KS statistic from `n` samples.
pub fn ks_standard_error(n: usize) -> f64 {
    KS_SCALED_SD / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
    /// Bins after pooling.
    pub bins: usize,
    /// Whether pooling merged any bins.
    pub pooled: bool,
}

impl ChiSquare {
    pub fn passes(&self) -> bool {
        self.p_value > P_VALUE_FLOOR
    }
}

/// Pearson goodness of fit of `counts` against `probs`, bin by bin.
///
/// Adjacent bins are merged left to right until each group expects at
/// least five observations; a short remainder joins the last group.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquare, VerifyError> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(VerifyError::Shape(format!(
            "{} counts against {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let n: u64 = counts.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let mut groups: Vec<(u64, f64)> = Vec::new();
    let mut acc = (0u64, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        acc.0 += c;
        acc.1 += p / total_p * n as f64;
        if acc.1 >= MIN_EXPECTED {
            groups.push(acc);
            acc = (0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => groups.push(acc),
        }
    }
    if groups.len() < 2 {
        return Err(VerifyError::Shape("fewer than two bins after pooling".into()));
    }
    let statistic: f64 = groups
        .iter()
        .map(|&(o, e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((groups.len() - 1) as f64).expect("positive degrees of freedom");
    Ok(ChiSquare {
        statistic,
        p_value: dist.sf(statistic),
        bins: groups.len(),
        pooled: groups.len() < counts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceReport {
    pub empirical: Estimate,
    pub target: Estimate,
    pub overlap: bool,
}

/// Mean of `exp(-N(g))` over the measures against a target interval.
pub fn laplace_compare(measures: &[PointMeasure], g: &TestFunction, target: Estimate) -> LaplaceReport {
    let values: Vec<f64> = measures.iter().map(|m| m.evaluate(g)).collect();
    laplace_compare_values(&values, target)
}

/// [`laplace_compare`] from precomputed values of `N(g)`.
pub fn laplace_compare_values(values: &[f64], target: Estimate) -> LaplaceReport {
    let acc: MeanAccumulator = values.iter().map(|v| (-v).exp()).collect();
    let empirical = if values.iter().all(|v| *v == 0.0) {
        Estimate::exact(1.0)
    } else {
        acc.estimate()
    };
    LaplaceReport {
        empirical,
        target,
        overlap: empirical.overlaps(&target),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub t: f64,
    pub stat: Estimate,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// `|stat - limit|` never rises by more than one pooled standard error.
    pub nonincreasing: bool,
    pub final_gap: f64,
    pub final_below: bool,
}

impl TrendReport {
    pub fn passes(&self) -> bool {
        self.nonincreasing && self.final_below
    }

    pub fn table(&self) -> String {
        let mut s = String::from("t\tstat\tse\tgap\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{:.5}\t{:.5}\t{:.5}\n",
                r.t,
                r.stat.value,
                r.stat.standard_error(),
                r.gap
            ));
        }
        s
    }
}

/// Checks that `|stat(t) - limit|` is nonincreasing along the grid (up to
/// one pooled standard error between neighbours) and that the last gap is
/// below `tolerance`. Needs at least three grid points.
pub fn convergence_report(stat_by_t: &[(f64, Estimate)], limit: f64, tolerance: f64) -> Result<TrendReport, VerifyError> {
    if stat_by_t.len() < 3 {
        return Err(VerifyError::TooFewSamples {
            needed: 3,
            got: stat_by_t.len(),
        });
    }
    let mut rows: Vec<TrendRow> = stat_by_t
        .iter()
        .map(|&(t, stat)| TrendRow {
            t,
            stat,
            gap: (stat.value - limit).abs(),
        })
        .collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    let nonincreasing = rows.windows(2).all(|w| {
        let pooled = w[0].stat.standard_error().hypot(w[1].stat.standard_error());
        w[1].gap <= w[0].gap + pooled
    });
    let final_gap = rows.last().expect("non-empty").gap;
    Ok(TrendReport {
        rows,
        nonincreasing,
        final_gap,
        final_below: final_gap < tolerance,
    })
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Proportion with a normal-approximation 95% interval.
pub fn proportion(hits: u64, n: u64) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate {
        value: p,
        half_width: bralev_core::stats::Z95 * (p * (1.0 - p) / n as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bralev_core::rng::{open01, replication_stream};
    use rand::Rng;

    fn exp_cdf(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x).exp()
        }
    }

    #[test]
    fn ks_of_own_law_is_small() {
        let mut rng = replication_stream(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| -open01(&mut rng).ln()).collect();
        assert!(ks_distance(&xs, exp_cdf, 0.0).unwrap() < 0.01);
    }

    #[test]
    fn ks_atom_and_shift() {
        let xs = vec![f64::NEG_INFINITY; 200];
        assert_eq!(ks_distance(&xs, exp_cdf, 1.0).unwrap(), 0.0);
        let mut rng = replication_stream(2, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| 1.0 - open01(&mut rng).ln()).collect();
        // the exact CDFs differ by 1 - e^{-1} at x = 1
        let d = ks_distance(&xs, exp_cdf, 0.0).unwrap();
        assert!(d >= 1.0 - (-1.0f64).exp() - 0.01);
        assert!(ks_distance(&xs[..50], exp_cdf, 0.0).is_err());
    }

    #[test]
    fn ks_is_invariant_under_monotone_maps() {
        let mut rng = replication_stream(3, 0);
        let xs: Vec<f64> = (0..5000).map(|_| -open01(&mut rng).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        // invert y = x³ + 2x by Newton
        let back = |y: f64| {
            let mut x = y.cbrt();
            for _ in 0..60 {
                x -= (x.powi(3) + 2.0 * x - y) / (3.0 * x * x + 2.0);
            }
            x
        };
        let a = ks_distance(&xs, exp_cdf, 0.0).unwrap();
        let b = ks_distance(&ys, |y| exp_cdf(back(y)), 0.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn chi_square_exact_counts() {
        let probs = [0.5, 0.25, 0.125, 0.125];
        let counts = [400, 200, 100, 100];
        let r = chi_square_gof(&counts, &probs).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.pooled);
    }

    #[test]
    fn censored_ks_ignores_the_atom_jump() {
        // Exp(1) censored at 0.5
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| (-(1.0 - (i as f64 + 0.5) / n as f64).ln()).max(0.5))
            .collect();
        let cdf = |x: f64| 1.0 - (-x).exp();
        assert!(ks_distance_censored(&samples, cdf, 0.5).unwrap() < 1e-3);
        assert!(ks_distance(&samples, cdf, 0.0).unwrap() > 0.3);
    }

    #[test]
    fn chi_square_pools_sparse_bins() {
        let probs = [0.9, 0.05, 0.03, 0.01, 0.01];
        let counts = [90, 5, 3, 1, 1];
        let r = chi_square_gof(&counts, &probs).unwrap();
        assert!(r.pooled);
        assert_eq!(r.bins, 3);
    }

    #[test]
    fn chi_square_has_power() {
        let mut rng = replication_stream(4, 0);
        let k = 10;
        let mut counts = vec![0u64; k];
        for _ in 0..100_000 {
            // triangular rather than uniform
            let u: f64 = rng.random::<f64>().max(rng.random::<f64>());
            counts[((u * k as f64) as usize).min(k - 1)] += 1;
        }
        let r = chi_square_gof(&counts, &vec![1.0 / k as f64; k]).unwrap();
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn laplace_trivial_cases() {
        let g = TestFunction::zero();
        let measures = vec![PointMeasure::new(); 10];
        let r = laplace_compare(&measures, &g, Estimate::exact(1.0));
        assert_eq!(r.empirical, Estimate::exact(1.0));
        assert!(r.overlap);
    }

    #[test]
    fn trend_checks() {
        let e = |v: f64| Estimate { value: v, half_width: 0.0 };
        let flat = [(4.0, e(0.3)), (6.0, e(0.3)), (8.0, e(0.3))];
        assert!(convergence_report(&flat, 0.3, 1e-9).unwrap().passes());
        let decaying: Vec<(f64, Estimate)> = [4.0, 6.0, 8.0].iter().map(|&t: &f64| (t, e(1.0 + (-t).exp()))).collect();
        let r = convergence_report(&decaying, 1.0, 1e-3).unwrap();
        assert!(r.passes());
        assert!((r.final_gap - (-8.0f64).exp()).abs() < 1e-12);
        let rising = [(4.0, e(0.1)), (6.0, e(0.2)), (8.0, e(0.05))];
        assert!(!convergence_report(&rising, 0.0, 1.0).unwrap().nonincreasing);
        assert!(convergence_report(&flat[..2], 0.3, 1.0).is_err());
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [4.0, 6.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 / 3.0 * x - 1.0).collect();
        assert!((regression_slope(&xs, &ys) - 2.0 / 3.0).abs() < 1e-12);
    }
}
