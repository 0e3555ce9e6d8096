//! Spatial normalization `h_t`, the tail weights `(q₁, q₂)` and the
//! power-law intensity
//! `v_α(dx) = q₁ x^{-1-α} 1{x>0} dx + q₂ |x|^{-1-α} 1{x<0} dx`.

use core::f64::consts::{E, PI};

use crate::error::{invalid, Error, Result};
use crate::special::{gamma, Complex};

/// Slowly varying factor `L` in `x^{-α} L(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowlyVarying {
    /// `L ≡ 1`.
    One,
    /// `L(x) = log(e + x)^power`.
    Log { power: f64 },
}

impl SlowlyVarying {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::One => 1.0,
            SlowlyVarying::Log { power } => libm::pow(libm::log(E + x), power),
        }
    }

    fn ln_eval(&self, x: f64) -> f64 {
        match *self {
            SlowlyVarying::One => 0.0,
            SlowlyVarying::Log { power } => power * libm::log(libm::log(E + x)),
        }
    }
}

/// Tail description `(α, q₁, q₂, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailScale {
    pub alpha: f64,
    pub q1: f64,
    pub q2: f64,
    pub slowly_varying: SlowlyVarying,
}

impl TailScale {
    pub fn new(alpha: f64, q1: f64, q2: f64, slowly_varying: SlowlyVarying) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha", "must lie in (0, 2)"));
        }
        if !(q1 >= 0.0 && q2 >= 0.0) || !(q1 + q2 > 0.0) || !(q1 + q2).is_finite() {
            return Err(invalid("q1", "q1, q2 must be finite, non-negative, with q1 + q2 > 0"));
        }
        if let SlowlyVarying::Log { power } = slowly_varying {
            if !power.is_finite() {
                return Err(invalid("log_power", "must be finite"));
            }
        }
        Ok(Self {
            alpha,
            q1,
            q2,
            slowly_varying,
        })
    }

    /// Shorthand for `L ≡ 1`.
    pub fn pure(alpha: f64, q1: f64, q2: f64) -> Result<Self> {
        Self::new(alpha, q1, q2, SlowlyVarying::One)
    }

    /// `v_α([a, ∞])`.
    pub fn right_tail(&self, a: f64) -> f64 {
        self.q1 * libm::pow(a, -self.alpha) / self.alpha
    }

    /// `v_α([-∞, -a])`.
    pub fn left_tail(&self, a: f64) -> f64 {
        self.q2 * libm::pow(a, -self.alpha) / self.alpha
    }

    /// `v_α({|x| ≥ a})`.
    pub fn two_sided_tail(&self, a: f64) -> f64 {
        (self.q1 + self.q2) * libm::pow(a, -self.alpha) / self.alpha
    }
}

/// Relative tolerance of the bisection for non-constant `L`.
pub const H_RELATIVE_TOLERANCE: f64 = 1e-10;

/// `h_t = inf{x > 0: x^{-α} L(x) ≤ e^{-λt}}`.
///
/// Closed form `e^{λt/α}` for `L ≡ 1`. Otherwise the bracket is grown in
/// `log x` around the closed-form guess, `g` is checked to be nonincreasing
/// on it, and the crossing is bisected.
pub fn compute_h(lambda: f64, scale: &TailScale, t: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "must be positive and finite"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", "must be non-negative and finite"));
    }
    let alpha = scale.alpha;
    let sv = scale.slowly_varying;
    if sv == SlowlyVarying::One {
        return Ok(libm::exp(lambda * t / alpha));
    }
    // work with y = ln x and G(y) = ln g(e^y) = -α y + ln L(e^y)
    let target = -lambda * t;
    let ln_g = |y: f64| -alpha * y + sv.ln_eval(libm::exp(y));
    let guess = lambda * t / alpha;
    let mut step = 1.0;
    let mut lo = guess - step;
    let mut hi = guess + step;
    let mut expansions = 0;
    while ln_g(hi) > target {
        step *= 2.0;
        hi = guess + step;
        expansions += 1;
        if expansions > 60 || !hi.is_finite() || hi > 700.0 {
            return Err(Error::Bracket(alloc::format!(
                "g(x) stays above e^(-{lambda}*{t}) up to x = e^{hi}"
            )));
        }
    }
    step = 1.0;
    expansions = 0;
    while ln_g(lo) <= target {
        step *= 2.0;
        lo = guess - step;
        expansions += 1;
        if expansions > 60 || lo < -700.0 {
            return Err(Error::Bracket(alloc::format!(
                "g(x) stays below e^(-{lambda}*{t}) down to x = e^{lo}"
            )));
        }
    }
    const PROBES: usize = 64;
    let mut prev = ln_g(lo);
    for k in 1..=PROBES {
        let y = lo + (hi - lo) * k as f64 / PROBES as f64;
        let v = ln_g(y);
        if v > prev + 1e-12 {
            return Err(Error::Bracket(alloc::format!(
                "g is not decreasing on [e^{lo}, e^{hi}]"
            )));
        }
        prev = v;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_g(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 0.1 * H_RELATIVE_TOLERANCE {
            break;
        }
    }
    Ok(libm::exp(hi))
}

/// `-Γ(-α) = Γ(1-α)/α`, the constant in
/// `∫₀^∞ (e^{iy} - 1 - iy 1{α > 1}) y^{-1-α} dy = -(Γ(1-α)/α) e^{-iπα/2}`.
pub fn stable_constant(alpha: f64) -> f64 {
    gamma(1.0 - alpha) / alpha
}

/// `c_* = (Γ(1-α)/α)(q₁e^{-iπα/2} + q₂e^{iπα/2})` for `α ≠ 1`; `c_* = π q`
/// (real) for `α = 1` with `q₁ = q₂ = q`.
pub fn forward_c_star(alpha: f64, q1: f64, q2: f64) -> Complex {
    if alpha == 1.0 {
        return Complex::new(PI * 0.5 * (q1 + q2), 0.0);
    }
    let k = stable_constant(alpha);
    let half = PI * alpha / 2.0;
    (Complex::from_angle(-half).scale(q1) + Complex::from_angle(half).scale(q2)).scale(k)
}

/// Recovers `(q₁, q₂)` from `c_*`.
///
/// With `A = Γ(1-α)/α`, the real and imaginary parts give
/// `q₁ + q₂ = Re c_* / (A cos(πα/2))` and `q₂ - q₁ = Im c_* / (A sin(πα/2))`.
/// At `α = 1` only the real part is used: `q₁ = q₂ = Re c_* / π`.
pub fn solve_q(c_star: Complex, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid("alpha", "must lie in (0, 2)"));
    }
    if !(c_star.re > 0.0) {
        return Err(invalid("c_star", "real part must be positive"));
    }
    if alpha == 1.0 {
        let q = c_star.re / PI;
        return Ok((q, q));
    }
    let k = stable_constant(alpha);
    let half = PI * alpha / 2.0;
    let sum = c_star.re / (k * libm::cos(half));
    let diff = c_star.im / (k * libm::sin(half));
    let q1 = 0.5 * (sum - diff);
    let q2 = 0.5 * (sum + diff);
    const SLACK: f64 = 1e-12;
    if q1 < -SLACK || q2 < -SLACK {
        return Err(invalid(
            "c_star",
            alloc::format!("implies negative tail weights (q1 = {q1}, q2 = {q2}) for alpha = {alpha}"),
        ));
    }
    Ok((q1.max(0.0), q2.max(0.0)))
}

/// `v_α([lo, hi])` for a closed interval of the extended line whose closure
/// avoids 0. Infinite endpoints are allowed.
pub fn v_alpha_interval(scale: &TailScale, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(invalid("interval", "endpoints must satisfy lo <= hi"));
    }
    let alpha = scale.alpha;
    let mass = |a: f64| {
        if a.is_infinite() {
            0.0
        } else {
            libm::pow(a, -alpha) / alpha
        }
    };
    if lo > 0.0 {
        Ok(scale.q1 * (mass(lo) - mass(hi)))
    } else if hi < 0.0 {
        Ok(scale.q2 * (mass(-hi) - mass(-lo)))
    } else {
        Err(invalid("interval", "must not touch 0 (v_alpha has infinite mass there)"))
    }
}

/// `v_α` of a finite union of disjoint closed intervals.
pub fn v_alpha_union(scale: &TailScale, intervals: &[(f64, f64)]) -> Result<f64> {
    intervals
        .iter()
        .map(|&(lo, hi)| v_alpha_interval(scale, lo, hi))
        .sum()
}
