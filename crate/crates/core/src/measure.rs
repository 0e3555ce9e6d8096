//! Finite point measures on `[-∞, ∞] \ {0}` and the test functions used to
//! probe them.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Smallest magnitude kept for an atom whose scaled location underflowed.
pub const ZERO_GUARD: f64 = 1e-300;

/// Atoms `(location, multiplicity)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointMeasure {
    atoms: Vec<(f64, u64)>,
}

impl PointMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            atoms: Vec::with_capacity(n),
        }
    }

    /// Adds an atom. `0` is not in the domain: exact zeros are dropped.
    pub fn push(&mut self, location: f64, multiplicity: u64) {
        if multiplicity == 0 || location == 0.0 || location.is_nan() {
            return;
        }
        self.atoms.push((location, multiplicity));
    }

    /// Adds the atom `raw / h`. A nonzero `raw` whose quotient underflows to
    /// `±0` is kept at `±1e-300`.
    pub fn push_scaled(&mut self, raw: f64, h: f64, multiplicity: u64) {
        if raw == 0.0 {
            return;
        }
        let mut x = raw / h;
        if x == 0.0 {
            x = ZERO_GUARD.copysign(raw);
        }
        self.push(x, multiplicity);
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total mass `Σ multiplicity`.
    pub fn total_mass(&self) -> u64 {
        self.atoms.iter().map(|&(_, m)| m).sum()
    }

    /// `∫ g dμ = Σ multiplicity · g(location)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.atoms.iter().map(|&(x, m)| m as f64 * g(x)).sum()
    }

    pub fn evaluate(&self, g: &TestFunction) -> f64 {
        self.integrate(|x| g.eval(x))
    }

    /// Mass of `(a, ∞]`.
    pub fn count_above(&self, a: f64) -> u64 {
        self.atoms
            .iter()
            .filter(|&&(x, _)| x > a)
            .map(|&(_, m)| m)
            .sum()
    }

    /// The `n` largest locations, multiplicities expanded, padded with `-∞`.
    pub fn order_statistics(&self, n: usize) -> Vec<f64> {
        let mut sorted: Vec<(f64, u64)> = self.atoms.clone();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out = Vec::with_capacity(n);
        'outer: for (x, m) in sorted {
            for _ in 0..m {
                if out.len() == n {
                    break 'outer;
                }
                out.push(x);
            }
        }
        out.resize(n, f64::NEG_INFINITY);
        out
    }
}

/// Top `n` order statistics with `-∞` padding.
pub fn order_statistics(measure: &PointMeasure, n: usize) -> Vec<f64> {
    measure.order_statistics(n)
}

/// Largest `n` values of `values`, descending, padded with `-∞`.
pub fn top_n(values: &[f64], n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n + 1);
    for &v in values {
        if out.len() < n {
            out.push(v);
            out.sort_by(|a, b| b.total_cmp(a));
        } else if n > 0 && v > out[n - 1] {
            out[n - 1] = v;
            out.sort_by(|a, b| b.total_cmp(a));
        }
    }
    out.resize(n, f64::NEG_INFINITY);
    out
}

/// Non-negative piecewise-linear function on the extended line, constant
/// beyond its outer knots and identically zero on `(-δ, δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    knots: Vec<(f64, f64)>,
    hole: f64,
}

impl TestFunction {
    /// `knots` sorted by strictly increasing `x`; every value non-negative
    /// and finite; the interpolant must vanish on `(-hole, hole)`.
    pub fn new(knots: Vec<(f64, f64)>, hole: f64) -> Result<Self> {
        if !(hole > 0.0) || !hole.is_finite() {
            return Err(invalid("hole", "radius must be positive and finite"));
        }
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("knots", "x coordinates must be strictly increasing"));
        }
        if knots
            .iter()
            .any(|&(x, y)| !x.is_finite() || !y.is_finite() || y < 0.0)
        {
            return Err(invalid("knots", "values must be finite and non-negative"));
        }
        let g = Self { knots, hole };
        // piecewise linear, so checking the endpoints and interior knots of
        // [-δ, δ] settles the whole interval
        let interior_zero = g
            .knots
            .iter()
            .filter(|&&(x, _)| x.abs() < hole)
            .all(|&(_, y)| y == 0.0);
        if !interior_zero || g.eval_raw(-hole) != 0.0 || g.eval_raw(hole) != 0.0 {
            return Err(invalid("knots", "function must vanish on (-hole, hole)"));
        }
        Ok(g)
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self {
            knots: Vec::new(),
            hole: 1.0,
        }
    }

    /// Tent on `[lo, hi]` (with `0 < lo < hi`), peaking at the midpoint.
    pub fn tent(lo: f64, hi: f64, height: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(invalid("knots", "tent needs 0 < lo < hi"));
        }
        Self::new(
            alloc::vec![(lo, 0.0), (0.5 * (lo + hi), height), (hi, 0.0)],
            lo,
        )
    }

    /// Zero below `lo`, linear up to `height` at `hi`, then constant to `+∞`.
    pub fn ramp_up(lo: f64, hi: f64, height: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(invalid("knots", "ramp needs 0 < lo < hi"));
        }
        Self::new(alloc::vec![(lo, 0.0), (hi, height)], lo)
    }

    pub fn hole(&self) -> f64 {
        self.hole
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|&(_, y)| y == 0.0)
    }

    /// Largest value taken.
    pub fn sup(&self) -> f64 {
        self.knots.iter().map(|&(_, y)| y).fold(0.0, f64::max)
    }

    fn eval_raw(&self, x: f64) -> f64 {
        let k = &self.knots;
        match k.len() {
            0 => 0.0,
            _ if x <= k[0].0 => k[0].1,
            n if x >= k[n - 1].0 => k[n - 1].1,
            _ => {
                let i = k.partition_point(|&(kx, _)| kx <= x);
                let (x0, y0) = k[i - 1];
                let (x1, y1) = k[i];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() < self.hole {
            0.0
        } else {
            self.eval_raw(x)
        }
    }

    /// Constant value on `[last knot, ∞]`.
    pub fn right_limit(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.1)
    }

    /// Constant value on `[-∞, first knot]`.
    pub fn left_limit(&self) -> f64 {
        self.knots.first().map_or(0.0, |k| k.1)
    }
}
