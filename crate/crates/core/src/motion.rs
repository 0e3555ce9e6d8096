//! Spatial motions: exact increment samplers and Lévy exponents.
//!
//! Supported laws are strictly α-stable processes with Lévy measure
//! `c₁ x^{-1-α} dx` on `(0, ∞)` and `c₂ |x|^{-1-α} dx` on `(-∞, 0)`,
//! independent sums of those (optionally with a Brownian part), and the
//! non-symmetric 1-stable process.
//!
//! Sampling uses the Chambers–Mallows–Stuck transform of a uniform angle and
//! a unit exponential. The exponent is first rewritten in the
//! `S_α(σ, β, μ)` parameterization:
//!
//! * `α ≠ 1`: for `θ > 0`,
//!   `ψ(θ) = -K θ^α (1 - i β tan(πα/2))` with
//!   `K = (Γ(1-α)/α) cos(πα/2) (c₁ + c₂)` and `β = (c₁ - c₂)/(c₁ + c₂)`.
//!   So `ξ_s ~ S_α((K s)^{1/α}, β, 0)`.
//! * symmetric `α = 1`: `ψ(θ) = -cπ|θ| + i a θ`, a Cauchy law with scale
//!   `cπ s` centred at `a s`.
//! * non-symmetric `α = 1`:
//!   `ψ(θ) = -(π/2)(c₁+c₂)θ - i(c₁-c₂)θ log θ + i a (c₁-c₂) θ`, which is
//!   `S_1(σ, β, μ)` with `σ = (π/2)(c₁+c₂)`, `β = (c₁-c₂)/(c₁+c₂)` and
//!   `μ = a(c₁-c₂)`; over a duration `s` all three of `σ, μ` scale by `s`.
//!
//! A Brownian part `-b²θ²` has variance `2b²s`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::normalization::{forward_c_star, solve_q, stable_constant, TailScale};
use crate::rng::{exponential, open01};
use crate::special::Complex;

/// Value of the Lévy exponent `ψ(θ) = log E e^{iθξ₁}`.
pub type ComplexExponent = Complex;

#[derive(Debug, Clone, PartialEq)]
pub enum MotionSpec {
    /// Strictly α-stable; the drift `a` is only meaningful at `α = 1`,
    /// where `c₁ = c₂` is required.
    StrictlyStable { alpha: f64, c1: f64, c2: f64, a: f64 },
    /// Independent sum. Exactly one non-Brownian component must carry the
    /// smallest index; it fixes the tail.
    Composite(Vec<MotionSpec>),
    /// 1-stable with `c₁ ≠ c₂`.
    NonSymmetricOneStable { c1: f64, c2: f64, a: f64 },
    /// `b·√2·B_t`; exponent `-b²θ²`. Only valid inside a composite.
    Brownian { b: f64 },
}

/// Whether [`tail_asymptote`] produced a first-order asymptote or only an
/// upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    Asymptote,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub kind: TailKind,
}

fn check_weights(c1: f64, c2: f64) -> Result<()> {
    if !(c1 >= 0.0 && c2 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(invalid("c1", "c1 and c2 must be finite and non-negative"));
    }
    if !(c1 + c2 > 0.0) {
        return Err(invalid("c2", "c1 + c2 must be positive"));
    }
    Ok(())
}

impl MotionSpec {
    /// Symmetric strictly stable law with `c₁ = c₂ = c` and no drift.
    pub fn symmetric_stable(alpha: f64, c: f64) -> Self {
        MotionSpec::StrictlyStable {
            alpha,
            c1: c,
            c2: c,
            a: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MotionSpec::StrictlyStable { alpha, c1, c2, a } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid("alpha", "must lie in (0, 2)"));
                }
                check_weights(*c1, *c2)?;
                if !a.is_finite() {
                    return Err(invalid("a", "must be finite"));
                }
                if *alpha == 1.0 && c1 != c2 {
                    return Err(invalid(
                        "c2",
                        "a 1-stable motion with c1 != c2 must be declared one-stable-asym",
                    ));
                }
                Ok(())
            }
            MotionSpec::NonSymmetricOneStable { c1, c2, a } => {
                check_weights(*c1, *c2)?;
                if c1 == c2 {
                    return Err(invalid("c2", "c1 == c2 is the symmetric stable case"));
                }
                if !a.is_finite() {
                    return Err(invalid("a", "must be finite"));
                }
                Ok(())
            }
            MotionSpec::Brownian { .. } => Err(invalid(
                "kind",
                "a Brownian motion has no heavy tail; use it only as a composite component",
            )),
            MotionSpec::Composite(parts) => {
                if parts.is_empty() {
                    return Err(invalid("components", "need at least one component"));
                }
                for p in parts {
                    match p {
                        MotionSpec::Composite(_) => {
                            return Err(invalid("components", "nested composites are not supported"))
                        }
                        MotionSpec::Brownian { b } => {
                            if !b.is_finite() {
                                return Err(invalid("b", "must be finite"));
                            }
                        }
                        other => other.validate()?,
                    }
                }
                let indices: Vec<f64> = parts.iter().filter_map(|p| p.own_index()).collect();
                let Some(min) = indices.iter().copied().reduce(f64::min) else {
                    return Err(invalid("components", "need at least one stable component"));
                };
                if indices.iter().filter(|&&x| x == min).count() != 1 {
                    return Err(invalid(
                        "components",
                        "exactly one component may attain the minimal stability index",
                    ));
                }
                Ok(())
            }
        }
    }

    fn own_index(&self) -> Option<f64> {
        match self {
            MotionSpec::StrictlyStable { alpha, .. } => Some(*alpha),
            MotionSpec::NonSymmetricOneStable { .. } => Some(1.0),
            _ => None,
        }
    }

    fn dominant(&self) -> &MotionSpec {
        match self {
            MotionSpec::Composite(parts) => parts
                .iter()
                .filter(|p| p.own_index().is_some())
                .min_by(|a, b| a.own_index().partial_cmp(&b.own_index()).unwrap())
                .expect("validated composite has a stable component"),
            other => other,
        }
    }

    /// Tail index `α*`.
    pub fn tail_index(&self) -> f64 {
        self.dominant().own_index().unwrap_or(f64::NAN)
    }

    /// `(α, q₁, q₂)` of the limit measure, with `L ≡ 1`.
    ///
    /// For strictly stable motions `q` comes from `c_*` through
    /// [`solve_q`]. The asymmetric 1-stable law has `Re c_* = 0`; there the
    /// limit measure is its own Lévy measure, so `q = (c₁, c₂)` with
    /// `h_t = e^{λt}`.
    pub fn tail_scale(&self) -> Result<TailScale> {
        self.validate()?;
        match *self.dominant() {
            MotionSpec::StrictlyStable { alpha, c1, c2, .. } => {
                let (q1, q2) = solve_q(forward_c_star(alpha, c1, c2), alpha)?;
                TailScale::pure(alpha, q1, q2)
            }
            MotionSpec::NonSymmetricOneStable { c1, c2, .. } => TailScale::pure(1.0, c1, c2),
            _ => unreachable!("dominant component is stable"),
        }
    }

    /// `c_*` such that `ψ(θ) ~ -c_* θ^α` as `θ ↓ 0`.
    pub fn c_star(&self) -> Result<Complex> {
        self.validate()?;
        Ok(match *self.dominant() {
            MotionSpec::StrictlyStable { alpha, c1, c2, .. } => forward_c_star(alpha, c1, c2),
            MotionSpec::NonSymmetricOneStable { c1, c2, .. } => Complex::new(0.0, c1 - c2),
            _ => unreachable!(),
        })
    }

    /// `ψ(θ)`.
    pub fn evaluate_psi(&self, theta: f64) -> Result<ComplexExponent> {
        self.validate()?;
        Ok(self.psi_unchecked(theta))
    }

    fn psi_unchecked(&self, theta: f64) -> Complex {
        if theta == 0.0 {
            return Complex::ZERO;
        }
        if theta < 0.0 {
            return self.psi_unchecked(-theta).conj();
        }
        match *self {
            MotionSpec::StrictlyStable { alpha, c1, c2, a } => {
                if alpha == 1.0 {
                    Complex::new(-c1 * PI * theta, a * theta)
                } else {
                    forward_c_star(alpha, c1, c2).scale(-libm::pow(theta, alpha))
                }
            }
            MotionSpec::NonSymmetricOneStable { c1, c2, a } => Complex::new(
                -FRAC_PI_2 * (c1 + c2) * theta,
                -(c1 - c2) * theta * libm::log(theta) + a * (c1 - c2) * theta,
            ),
            MotionSpec::Brownian { b } => Complex::new(-b * b * theta * theta, 0.0),
            MotionSpec::Composite(ref parts) => parts.iter().map(|p| p.psi_unchecked(theta)).sum(),
        }
    }

    /// Precomputes the transform constants.
    pub fn sampler(&self) -> Result<IncrementSampler> {
        self.validate()?;
        Ok(IncrementSampler {
            parts: self.components().iter().map(Part::new).collect(),
        })
    }

    fn components(&self) -> &[MotionSpec] {
        match self {
            MotionSpec::Composite(parts) => parts,
            other => core::slice::from_ref(other),
        }
    }

    /// One draw of `ξ_s`. Prefer [`MotionSpec::sampler`] in loops.
    pub fn sample_increment<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(invalid("s", "duration must be non-negative"));
        }
        Ok(self.sampler()?.sample(s, rng))
    }
}

/// `((q₁+q₂)/α) s x^{-α}`, the first-order approximation of
/// `P(|ξ_s| ≥ x)` (`L ≡ 1` for all supported samplers).
///
/// The asymmetric 1-stable law has no such asymptote in this form; it gets
/// the explicit bound
/// `π(c₁+c₂) s/x + (c₁-c₂)² s² x^{-2} ∫₀² (a - log θ + log x)² θ² dθ`.
pub fn tail_asymptote(spec: &MotionSpec, s: f64, x: f64) -> Result<TailEstimate> {
    if !(x > 0.0) {
        return Err(invalid("x", "must be positive"));
    }
    if !(s > 0.0) {
        return Err(invalid("s", "must be positive"));
    }
    if let MotionSpec::NonSymmetricOneStable { c1, c2, a } = *spec.dominant() {
        spec.validate()?;
        if matches!(spec, MotionSpec::NonSymmetricOneStable { .. }) {
            // ∫₀² θ² dθ, ∫₀² θ² log θ dθ, ∫₀² θ² log²θ dθ
            let i0 = 8.0 / 3.0;
            let i1 = 8.0 / 3.0 * LN_2 - 8.0 / 9.0;
            let i2 = 8.0 / 3.0 * LN_2 * LN_2 - 16.0 / 9.0 * LN_2 + 16.0 / 27.0;
            let shift = a + libm::log(x);
            let integral = shift * shift * i0 - 2.0 * shift * i1 + i2;
            let d = c1 - c2;
            let value = PI * (c1 + c2) * s / x + d * d * s * s / (x * x) * integral;
            return Ok(TailEstimate {
                value,
                kind: TailKind::Bound,
            });
        }
    }
    let scale = spec.tail_scale()?;
    Ok(TailEstimate {
        value: (scale.q1 + scale.q2) / scale.alpha * s * libm::pow(x, -scale.alpha),
        kind: TailKind::Asymptote,
    })
}

/// Compiled sampler for a [`MotionSpec`].
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    parts: Vec<Part>,
}

#[derive(Debug, Clone, Copy)]
enum Part {
    /// `S_α(1, β, 0)` scaled by `(K s)^{1/α}`.
    Stable {
        alpha: f64,
        inv_alpha: f64,
        k: f64,
        shift: f64,
        stretch: f64,
    },
    Cauchy { scale: f64, drift: f64 },
    /// `S_1(σ s, β, μ s)`.
    OneStable { sigma: f64, beta: f64, mu: f64 },
    Gaussian { variance_rate: f64 },
}

impl Part {
    fn new(spec: &MotionSpec) -> Part {
        match *spec {
            MotionSpec::StrictlyStable { alpha, c1, c2, a } => {
                if alpha == 1.0 {
                    Part::Cauchy {
                        scale: c1 * PI,
                        drift: a,
                    }
                } else {
                    let beta = (c1 - c2) / (c1 + c2);
                    let tan = libm::tan(PI * alpha / 2.0);
                    let k = stable_constant(alpha) * libm::cos(PI * alpha / 2.0) * (c1 + c2);
                    Part::Stable {
                        alpha,
                        inv_alpha: 1.0 / alpha,
                        k,
                        shift: libm::atan(beta * tan) / alpha,
                        stretch: libm::pow(1.0 + beta * beta * tan * tan, 1.0 / (2.0 * alpha)),
                    }
                }
            }
            MotionSpec::NonSymmetricOneStable { c1, c2, a } => Part::OneStable {
                sigma: FRAC_PI_2 * (c1 + c2),
                beta: (c1 - c2) / (c1 + c2),
                mu: a * (c1 - c2),
            },
            MotionSpec::Brownian { b } => Part::Gaussian {
                variance_rate: 2.0 * b * b,
            },
            MotionSpec::Composite(_) => unreachable!("flattened by sampler()"),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        match *self {
            Part::Stable {
                alpha,
                inv_alpha,
                k,
                shift,
                stretch,
            } => {
                let v = PI * (open01(rng) - 0.5);
                let w = exponential(rng, 1.0);
                let arg = alpha * (v + shift);
                let cos_v = libm::cos(v);
                let x = stretch * libm::sin(arg) / libm::pow(cos_v, inv_alpha)
                    * libm::pow(libm::cos(v - arg) / w, (1.0 - alpha) * inv_alpha);
                libm::pow(k * s, inv_alpha) * x
            }
            Part::Cauchy { scale, drift } => {
                let v = PI * (open01(rng) - 0.5);
                drift * s + scale * s * libm::tan(v)
            }
            Part::OneStable { sigma, beta, mu } => {
                let v = PI * (open01(rng) - 0.5);
                let w = exponential(rng, 1.0);
                let tilt = FRAC_PI_2 + beta * v;
                let x = (tilt * libm::tan(v)
                    - beta * libm::log(FRAC_PI_2 * w * libm::cos(v) / tilt))
                    / FRAC_PI_2;
                let sig = sigma * s;
                sig * x + beta * sig * libm::log(sig) / FRAC_PI_2 + mu * s
            }
            Part::Gaussian { variance_rate } => {
                let z: f64 = StandardNormal.sample(rng);
                libm::sqrt(variance_rate * s) * z
            }
        }
    }
}

impl IncrementSampler {
    /// A draw of `ξ_s`; exactly 0 when `s = 0`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.parts.as_slice() {
            [only] => only.sample(s, rng),
            parts => parts.iter().map(|p| p.sample(s, rng)).sum(),
        }
    }
}
