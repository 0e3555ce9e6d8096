//! Probabilistic evaluation of `u_g(t, x) = E_x exp(-Σ_{v ∈ L_t} g(ξ_t^v))`
//! and of the level sets of `1 - u_g(t, ·)`.
//!
//! Estimates share one batch of trees across all shifts `x` (common random
//! numbers), so comparisons between shifts have low variance.

use alloc::vec::Vec;

use rand::Rng;

use crate::branching::BranchingConfig;
use crate::error::{invalid, Error, Result};
use crate::motion::MotionSpec;
use crate::stats::{Estimate, MeanAccumulator};
use crate::tree::simulate_tree_with;

/// Non-negative weight `g` for the KPP functional. Unlike
/// [`crate::TestFunction`] it need not vanish near the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum KppWeight {
    /// Linear interpolation of the knots, constant beyond them.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `∞ · 1_{[threshold, ∞)}`.
    HardIndicator { threshold: f64 },
}

impl KppWeight {
    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("knots", "x coordinates must be strictly increasing"));
        }
        if knots
            .iter()
            .any(|&(x, y)| !x.is_finite() || !y.is_finite() || y < 0.0)
        {
            return Err(invalid("knots", "values must be finite and non-negative"));
        }
        Ok(KppWeight::PiecewiseLinear(knots))
    }

    /// `0` below `lo`, rising linearly to `height` at `hi`, constant after.
    pub fn ramp(lo: f64, hi: f64, height: f64) -> Result<Self> {
        Self::piecewise(alloc::vec![(lo, 0.0), (hi, height)])
    }

    pub fn zero() -> Self {
        KppWeight::PiecewiseLinear(Vec::new())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            KppWeight::HardIndicator { threshold } => {
                if x >= *threshold {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            KppWeight::PiecewiseLinear(k) => match k.len() {
                0 => 0.0,
                _ if x <= k[0].0 => k[0].1,
                n if x >= k[n - 1].0 => k[n - 1].1,
                _ => {
                    let i = k.partition_point(|&(kx, _)| kx <= x);
                    let (x0, y0) = k[i - 1];
                    let (x1, y1) = k[i];
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                }
            },
        }
    }

    /// A point below which `g` vanishes, if there is one.
    fn zero_below(&self) -> Option<f64> {
        match self {
            KppWeight::HardIndicator { threshold } => Some(*threshold),
            KppWeight::PiecewiseLinear(k) => match k.first() {
                None => Some(f64::INFINITY),
                Some(&(x0, 0.0)) => Some(x0),
                Some(_) => None,
            },
        }
    }

    /// Whether `g` is nondecreasing, which makes `1 - u_g(t, ·)`
    /// nondecreasing too.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            KppWeight::HardIndicator { .. } => true,
            KppWeight::PiecewiseLinear(k) => k.windows(2).all(|w| w[0].1 <= w[1].1),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, KppWeight::PiecewiseLinear(k) if k.iter().all(|p| p.1 == 0.0))
    }
}

/// Alive positions of a batch of trees at a common horizon, each tree
/// sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBatch {
    horizon: f64,
    trees: Vec<Vec<f64>>,
}

impl TreeBatch {
    pub fn new(horizon: f64, mut trees: Vec<Vec<f64>>) -> Self {
        for t in &mut trees {
            t.sort_by(|a, b| b.total_cmp(a));
        }
        Self { horizon, trees }
    }

    /// Simulates `n` trees sequentially from one stream.
    pub fn simulate<R: Rng + ?Sized>(
        cfg: &BranchingConfig,
        motion: &MotionSpec,
        t: f64,
        n: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let sampler = motion.sampler()?;
        let trees = (0..n)
            .map(|_| simulate_tree_with(cfg, &sampler, t, rng).map(|tr| tr.alive_positions()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(t, trees))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Rightmost position of every tree (`-∞` when extinct).
    pub fn rightmost(&self) -> Vec<f64> {
        self.trees
            .iter()
            .map(|t| t.first().copied().unwrap_or(f64::NEG_INFINITY))
            .collect()
    }

    fn exponent(positions: &[f64], g: &KppWeight, x: f64, cutoff: Option<f64>) -> f64 {
        let mut s = 0.0;
        for &p in positions {
            let y = p + x;
            if let Some(c) = cutoff {
                if y < c {
                    break;
                }
            }
            s += g.eval(y);
        }
        s
    }

    /// `1 - u_g(t, x)` with a 95% interval.
    pub fn one_minus_u(&self, g: &KppWeight, x: f64) -> Estimate {
        let cutoff = g.zero_below();
        let acc: MeanAccumulator = self
            .trees
            .iter()
            .map(|t| -libm::expm1(-Self::exponent(t, g, x, cutoff)))
            .collect();
        acc.estimate()
    }

    /// `u_g(t, x)` with a 95% interval.
    pub fn u(&self, g: &KppWeight, x: f64) -> Estimate {
        let e = self.one_minus_u(g, x);
        Estimate {
            value: 1.0 - e.value,
            half_width: e.half_width,
        }
    }
}

/// Monte Carlo `u_g(t, x)` over `n` fresh trees; exact at `t = 0`.
pub fn estimate_u<R: Rng + ?Sized>(
    cfg: &BranchingConfig,
    motion: &MotionSpec,
    g: &KppWeight,
    t: f64,
    x: f64,
    n: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if g.is_zero() {
        return Ok(Estimate::exact(1.0));
    }
    if t == 0.0 {
        return Ok(Estimate::exact(libm::exp(-g.eval(x))));
    }
    if n < 2 {
        return Err(invalid("replications", "need at least two trees"));
    }
    Ok(TreeBatch::simulate(cfg, motion, t, n, rng)?.u(g, x))
}

/// Result of the front search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Front {
    pub x: f64,
    /// Final bracket; both ends were resolved on opposite sides of `θ`.
    pub lo: f64,
    pub hi: f64,
    pub estimate: Estimate,
    pub steps: u32,
}

/// Relative bracket width at which bisection stops.
pub const FRONT_RELATIVE_WIDTH: f64 = 0.02;

/// Half-width above which an estimate of `1 - u` is useless for locating a
/// level.
pub const FRONT_MAX_HALF_WIDTH: f64 = 0.25;

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo < 0.0 && hi < 0.0 {
        -libm::sqrt(lo * hi)
    } else if lo > 0.0 && hi > 0.0 {
        libm::sqrt(lo * hi)
    } else {
        0.5 * (lo + hi)
    }
}

/// Bisection for `1 - u_g(t, x) = θ` over `[lo, hi]`, for nondecreasing `g`.
///
/// The midpoint is geometric when the bracket does not contain the origin.
/// Bisection continues while the interval at the midpoint excludes `θ`, and
/// stops at the first midpoint whose interval covers `θ` or once the
/// bracket is narrower than 2% of its midpoint.
pub fn front_position(batch: &TreeBatch, g: &KppWeight, theta: f64, bracket: (f64, f64)) -> Result<Front> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", "level must lie in (0, 1)"));
    }
    if !g.is_nondecreasing() {
        return Err(invalid("g", "front search needs a nondecreasing weight"));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(invalid("bracket", "needs lo < hi"));
    }
    let f_lo = batch.one_minus_u(g, lo);
    let f_hi = batch.one_minus_u(g, hi);
    if !(f_lo.upper() < theta && f_hi.lower() > theta) {
        return Err(Error::Bracket(alloc::format!(
            "1 - u is {:.4}±{:.4} at {lo:e} and {:.4}±{:.4} at {hi:e}; level {theta} not separated",
            f_lo.value, f_lo.half_width, f_hi.value, f_hi.half_width
        )));
    }
    let mut steps = 0;
    loop {
        let mid = midpoint(lo, hi);
        let est = batch.one_minus_u(g, mid);
        steps += 1;
        if est.half_width > FRONT_MAX_HALF_WIDTH {
            return Err(Error::CiTooWide {
                half_width: est.half_width,
                tolerance: FRONT_MAX_HALF_WIDTH,
            });
        }
        if est.contains(theta) {
            return Ok(Front { x: mid, lo, hi, estimate: est, steps });
        }
        if est.value < theta {
            lo = mid;
        } else {
            hi = mid;
        }
        let centre = midpoint(lo, hi);
        if (hi - lo).abs() <= FRONT_RELATIVE_WIDTH * centre.abs() || steps >= 200 {
            let estimate = batch.one_minus_u(g, centre);
            return Ok(Front { x: centre, lo, hi, estimate, steps });
        }
    }
}

/// Whether estimates of `1 - u` along increasing `xs` never drop by more
/// than the combined half-widths.
pub fn is_monotone_within_ci(batch: &TreeBatch, g: &KppWeight, xs: &[f64]) -> bool {
    let est: Vec<Estimate> = xs.iter().map(|&x| batch.one_minus_u(g, x)).collect();
    est.windows(2)
        .all(|w| w[1].value + w[1].half_width + w[0].half_width >= w[0].value)
}

/// Largest estimate over a grid, with its own interval.
pub fn sup_estimate<F: Fn(f64) -> Estimate>(xs: &[f64], f: F) -> Estimate {
    xs.iter()
        .map(|&x| f(x))
        .fold(Estimate::exact(0.0), |best, e| if e.value > best.value { e } else { best })
}

/// `(sup_{x ≤ -e^{γ_fast t}} (1 - u), sup_{x ≥ -e^{γ_slow t}} u)` evaluated
/// on the grids `-e^{γ_fast t} · m` and `-e^{γ_slow t} / m` for the given
/// multipliers `m ≥ 1`.
pub fn band_sups(
    batch: &TreeBatch,
    g: &KppWeight,
    gamma_fast: f64,
    gamma_slow: f64,
    multipliers: &[f64],
) -> (Estimate, Estimate) {
    let t = batch.horizon();
    let fast = libm::exp(gamma_fast * t);
    let slow = libm::exp(gamma_slow * t);
    let xs_fast: Vec<f64> = multipliers.iter().map(|m| -fast * m).collect();
    let xs_slow: Vec<f64> = multipliers.iter().map(|m| -slow / m).collect();
    (
        sup_estimate(&xs_fast, |x| batch.one_minus_u(g, x)),
        sup_estimate(&xs_slow, |x| batch.u(g, x)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replication_stream;

    fn yule() -> BranchingConfig {
        BranchingConfig::yule(1.0).unwrap()
    }

    fn stable() -> MotionSpec {
        MotionSpec::symmetric_stable(1.5, 1.0)
    }

    #[test]
    fn trivial_cases_are_exact() {
        let mut rng = replication_stream(1, 0);
        let g = KppWeight::ramp(0.0, 1.0, 2.0).unwrap();
        assert_eq!(
            estimate_u(&yule(), &stable(), &KppWeight::zero(), 3.0, 0.5, 1000, &mut rng).unwrap(),
            Estimate::exact(1.0)
        );
        let u0 = estimate_u(&yule(), &stable(), &g, 0.0, 0.5, 1000, &mut rng).unwrap();
        assert_eq!(u0, Estimate::exact(libm::exp(-1.0)));
    }

    #[test]
    fn u_lies_in_unit_interval_and_orders() {
        let mut rng = replication_stream(2, 0);
        let batch = TreeBatch::simulate(&yule(), &stable(), 3.0, 2000, &mut rng).unwrap();
        let small = KppWeight::ramp(0.0, 1.0, 0.5).unwrap();
        let large = KppWeight::ramp(0.0, 1.0, 2.0).unwrap();
        for &x in &[-20.0, -3.0, 0.0, 2.0] {
            let a = batch.u(&small, x);
            let b = batch.u(&large, x);
            assert!((0.0..=1.0).contains(&a.value) && (0.0..=1.0).contains(&b.value));
            // common trees make the comparison pathwise
            assert!(b.value <= a.value);
        }
        let xs: Vec<f64> = (0..20).map(|i| -30.0 + 1.5 * i as f64).collect();
        assert!(is_monotone_within_ci(&batch, &large, &xs));
    }

    #[test]
    fn hard_indicator_collapses_to_rightmost() {
        let mut rng = replication_stream(3, 0);
        let batch = TreeBatch::simulate(&yule(), &stable(), 2.5, 3000, &mut rng).unwrap();
        let g = KppWeight::HardIndicator { threshold: 0.0 };
        let rightmost = batch.rightmost();
        for &x in &[-8.0, -2.0, 0.5] {
            let direct = rightmost.iter().filter(|&&r| r + x < 0.0).count() as f64 / rightmost.len() as f64;
            assert!((batch.u(&g, x).value - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn front_is_ordered_in_level() {
        let mut rng = replication_stream(4, 0);
        let batch = TreeBatch::simulate(&yule(), &stable(), 3.0, 3000, &mut rng).unwrap();
        let g = KppWeight::ramp(0.0, 1.0, 1.0).unwrap();
        let bracket = (-1e4, -1e-2);
        let low = front_position(&batch, &g, 0.3, bracket).unwrap();
        let high = front_position(&batch, &g, 0.7, bracket).unwrap();
        assert!(low.x < 0.0 && high.x < 0.0);
        assert!(low.x <= high.x, "{low:?} {high:?}");
        assert!(low.lo <= low.x && low.x <= low.hi);
        assert!(batch.one_minus_u(&g, low.lo).upper() < 0.3);
    }

    #[test]
    fn front_rejects_bad_brackets() {
        let mut rng = replication_stream(5, 0);
        let batch = TreeBatch::simulate(&yule(), &stable(), 2.0, 1000, &mut rng).unwrap();
        let g = KppWeight::ramp(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(front_position(&batch, &g, 0.5, (-1e6, -1e5)), Err(Error::Bracket(_))));
        assert!(front_position(&batch, &g, 1.5, (-1e4, 0.0)).is_err());
        let bumpy = KppWeight::piecewise(alloc::vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert!(front_position(&batch, &bumpy, 0.5, (-1e4, 0.0)).is_err());
    }

    #[test]
    fn zero_weight_band_is_trivial() {
        let mut rng = replication_stream(6, 0);
        let batch = TreeBatch::simulate(&yule(), &stable(), 2.0, 500, &mut rng).unwrap();
        let (fast, _) = band_sups(&batch, &KppWeight::zero(), 1.0, 0.3, &[1.0, 2.0, 4.0]);
        assert_eq!(fast.value, 0.0);
    }

    #[test]
    fn pruned_sum_matches_full_sum() {
        let positions = alloc::vec![5.0, 2.0, 1.0, -3.0];
        let g = KppWeight::ramp(0.5, 2.0, 1.0).unwrap();
        let pruned = TreeBatch::exponent(&positions, &g, 0.0, g.zero_below());
        let full: f64 = positions.iter().map(|&p| g.eval(p)).sum();
        assert_eq!(pruned, full);
    }
}
