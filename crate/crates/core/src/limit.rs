//! The limiting Cox cluster process `N_∞ = Σ_j T_j δ_{e_j}`, where the
//! `e_j` form a Poisson random measure with intensity `ϑ W v_α(dx)` and the
//! marks `T_j` are i.i.d. cluster sizes.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::branching::{
    default_w_horizon, draw_population, sample_cluster_size, sample_w, theta_constant,
    BranchingConfig, ClusterMode, ThetaMode,
};
use crate::error::{invalid, Error, Result};
use crate::measure::{PointMeasure, TestFunction};
use crate::motion::MotionSpec;
use crate::normalization::TailScale;
use crate::rng::{exponential, open01};
use crate::special::GaussLegendre;
use crate::stats::{Estimate, MeanAccumulator, Z95};

/// Below this a draw of `W` counts as extinction.
pub const SURVIVAL_THRESHOLD: f64 = 1e-12;

/// Resampling attempts allowed when conditioning `W` on survival.
pub const CONDITIONING_CAP: u64 = 1_000_000;

/// Law of the martingale limit `W`.
#[derive(Debug, Clone, PartialEq)]
pub enum WLaw {
    /// `Exponential` with the given mean (`1` for the Yule process).
    Exponential { mean: f64 },
    /// Point mass (`0` gives the extinct limit).
    Constant(f64),
    /// Resampling from stored draws.
    Empirical(Vec<f64>),
    /// `e^{-λ h} Z_h` at a truncation horizon `h`.
    Simulated { branching: BranchingConfig, horizon: f64 },
}

impl WLaw {
    /// The exact law for the Yule process, a truncation approximation
    /// otherwise.
    pub fn for_branching(cfg: &BranchingConfig) -> Self {
        if cfg.offspring.is_yule() {
            WLaw::Exponential { mean: 1.0 }
        } else {
            WLaw::Simulated {
                branching: cfg.clone(),
                horizon: default_w_horizon(cfg),
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            WLaw::Exponential { mean } => exponential(rng, 1.0 / mean),
            WLaw::Constant(w) => *w,
            WLaw::Empirical(draws) => {
                if draws.is_empty() {
                    return Err(invalid("w", "empirical law has no draws"));
                }
                draws[rng.random_range(0..draws.len())]
            }
            WLaw::Simulated { branching, horizon } => sample_w(branching, *horizon, rng)?,
        })
    }

    /// A draw of `W | W > 0`, by rejection.
    pub fn sample_conditioned<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        for _ in 0..CONDITIONING_CAP {
            let w = self.sample(rng)?;
            if w > SURVIVAL_THRESHOLD {
                return Ok(w);
            }
        }
        Err(Error::NoConvergence {
            what: "conditioning W on survival",
            iterations: CONDITIONING_CAP,
        })
    }

    /// `n` draws of `W | W > 0`, stored.
    pub fn conditioned_draws<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<WLaw> {
        let draws = (0..n)
            .map(|_| self.sample_conditioned(rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(WLaw::Empirical(draws))
    }

    /// `(E* e^{-μW}, E* W e^{-μW})` under `W | W > 0`, when it can be
    /// computed without sampling.
    pub fn conditioned_transform(&self, mu: f64) -> Option<(f64, f64)> {
        match self {
            WLaw::Exponential { mean } => {
                let d = 1.0 + mean * mu;
                Some((1.0 / d, mean / (d * d)))
            }
            WLaw::Constant(w) if *w > SURVIVAL_THRESHOLD => {
                let e = libm::exp(-mu * w);
                Some((e, w * e))
            }
            WLaw::Empirical(draws) => {
                let mut n = 0usize;
                let (mut a, mut b) = (0.0, 0.0);
                for &w in draws.iter().filter(|&&w| w > SURVIVAL_THRESHOLD) {
                    let e = libm::exp(-mu * w);
                    a += e;
                    b += w * e;
                    n += 1;
                }
                (n > 0).then(|| (a / n as f64, b / n as f64))
            }
            _ => None,
        }
    }
}

/// Law of the cluster marks `T_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLaw {
    pub branching: BranchingConfig,
    pub mode: ClusterMode,
    p_one: Option<Estimate>,
}

impl ClusterLaw {
    pub fn new(branching: BranchingConfig) -> Self {
        let p_one = branching.offspring.is_yule().then(|| Estimate::exact(0.5));
        Self {
            branching,
            mode: ClusterMode::Auto,
            p_one,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        sample_cluster_size(&self.branching, self.mode, rng)
    }

    /// `P(T = 1)`: exact for the Yule process, otherwise whatever
    /// [`ClusterLaw::estimate_p_one`] cached.
    pub fn p_one(&self) -> Option<Estimate> {
        self.p_one
    }

    /// Estimates and caches `P(T = 1)` from `n` draws.
    pub fn estimate_p_one<R: Rng + ?Sized>(&mut self, n: u64, rng: &mut R) -> Result<Estimate> {
        if let Some(p) = self.p_one.filter(|p| p.half_width == 0.0) {
            return Ok(p);
        }
        let mut acc = MeanAccumulator::new();
        for _ in 0..n {
            acc.push((self.sample(rng)? == 1) as u8 as f64);
        }
        let p = acc.estimate();
        self.p_one = Some(p);
        Ok(p)
    }
}

/// Everything that determines the law of `N_∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSpec {
    pub scale: TailScale,
    pub theta: f64,
    pub w: WLaw,
    pub cluster: ClusterLaw,
}

impl LimitSpec {
    pub fn new(scale: TailScale, theta: f64, w: WLaw, cluster: ClusterLaw) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(invalid("theta", "must be positive and finite"));
        }
        if theta > 1.0 / cluster.branching.lambda() * (1.0 + 1e-9) {
            return Err(invalid("theta", "cannot exceed 1/lambda"));
        }
        Ok(Self {
            scale,
            theta,
            w,
            cluster,
        })
    }

    /// The limit attached to a branching mechanism and a motion, with `ϑ`
    /// computed analytically.
    pub fn from_model(cfg: &BranchingConfig, motion: &MotionSpec) -> Result<Self> {
        let scale = motion.tail_scale()?;
        let mut unused = crate::rng::replication_stream(0, 0);
        let theta = theta_constant(cfg, ThetaMode::Analytic, &mut unused)?.value;
        Self::new(scale, theta, WLaw::for_branching(cfg), ClusterLaw::new(cfg.clone()))
    }

    fn lambda(&self) -> f64 {
        self.cluster.branching.lambda()
    }

    /// `μ = q₁ ϑ x^{-α} / α`.
    fn right_intensity(&self, x: f64) -> f64 {
        self.theta * self.scale.right_tail(x)
    }
}

/// One draw of `N_∞` restricted to `{|x| ≥ a}`.
pub fn sample_limit_process<R: Rng + ?Sized>(spec: &LimitSpec, a: f64, rng: &mut R) -> Result<PointMeasure> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid("a", "truncation must be positive and finite"));
    }
    let w = spec.w.sample(rng)?;
    let mut out = PointMeasure::new();
    let q1 = spec.scale.q1;
    let q2 = spec.scale.q2;
    let mass = spec.theta * w * spec.scale.two_sided_tail(a);
    if !(mass > 0.0) {
        return Ok(out);
    }
    let count = Poisson::new(mass)
        .map_err(|_| invalid("w", "Poisson intensity out of range"))?
        .sample(rng) as u64;
    let p_right = q1 / (q1 + q2);
    let inv_alpha = 1.0 / spec.scale.alpha;
    for _ in 0..count {
        let right = rng.random::<f64>() < p_right;
        let r = a * libm::pow(open01(rng), -inv_alpha);
        let mult = spec.cluster.sample(rng)?;
        out.push(if right { r } else { -r }, mult);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaplaceMode {
    /// Outer average over `W`, inner over `(r, x, Z_r)`.
    NestedMonteCarlo { outer: u64, inner: u64 },
    /// Deterministic quadrature against the geometric law of the Yule
    /// population.
    YuleQuadrature,
}

/// `E exp{-W ∫₀^∞ e^{-λr} ∫ E(1 - e^{-Z_r g(x)}) v_α(dx) dr}`.
pub fn laplace_limit<R: Rng + ?Sized>(
    spec: &LimitSpec,
    g: &TestFunction,
    mode: LaplaceMode,
    rng: &mut R,
) -> Result<Estimate> {
    if g.is_zero() {
        return Ok(Estimate::exact(1.0));
    }
    match mode {
        LaplaceMode::NestedMonteCarlo { outer, inner } => nested_laplace(spec, g, outer, inner, rng),
        LaplaceMode::YuleQuadrature => yule_laplace(spec, g),
    }
}

fn nested_laplace<R: Rng + ?Sized>(
    spec: &LimitSpec,
    g: &TestFunction,
    outer: u64,
    inner: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if outer < 2 || inner < 1 {
        return Err(invalid("replications", "nested estimator needs outer ≥ 2 and inner ≥ 1"));
    }
    let delta = g.hole();
    let q1 = spec.scale.q1;
    let q2 = spec.scale.q2;
    let mass = spec.scale.two_sided_tail(delta);
    let p_right = q1 / (q1 + q2);
    let inv_alpha = 1.0 / spec.scale.alpha;
    let lambda = spec.lambda();
    let mut acc = MeanAccumulator::new();
    for _ in 0..outer {
        let w = spec.w.sample(rng)?;
        let mut inner_acc = 0.0;
        for _ in 0..inner {
            let r = exponential(rng, lambda);
            let right = rng.random::<f64>() < p_right;
            let x = delta * libm::pow(open01(rng), -inv_alpha);
            let x = if right { x } else { -x };
            let z = draw_population(&spec.cluster.branching, r, rng)?;
            inner_acc += 1.0 - libm::exp(-(z as f64) * g.eval(x));
        }
        // r ~ Exp(λ) absorbs e^{-λr} up to the factor 1/λ
        let c = mass / lambda * inner_acc / inner as f64;
        acc.push(libm::exp(-w * c));
    }
    Ok(acc.estimate())
}

const QUADRATURE_NODES: usize = 24;

/// `∫₀¹ [1 - u z / (1 - (1-u) z)] du = -(1-z) log(1-z) / z` with
/// `z = e^{-g}`: the Yule population at time `r` is geometric with success
/// probability `u = e^{-λr}`, and the `u`-integral is elementary.
fn yule_inner(value: f64) -> f64 {
    if value <= 0.0 {
        return 0.0;
    }
    let z = libm::exp(-value);
    let c = -libm::expm1(-value);
    let log_c = if z < 0.5 { libm::log1p(-z) } else { libm::log(c) };
    -c * log_c / z
}

/// `∫_{|x|≥δ} φ(g(x)) v_α(dx)` with the substitution `y = |x|^{-α}` on each
/// side, which turns `v_α` into a multiple of Lebesgue measure.
fn yule_exponent(spec: &LimitSpec, g: &TestFunction, pieces: usize) -> f64 {
    let rule = GaussLegendre::new(QUADRATURE_NODES);
    let alpha = spec.scale.alpha;
    let phi = yule_inner;
    let mut total = 0.0;
    for (side, q) in [(1.0, spec.scale.q1), (-1.0, spec.scale.q2)] {
        if q == 0.0 {
            continue;
        }
        let mut breaks: Vec<f64> = g
            .knots()
            .iter()
            .map(|&(x, _)| side * x)
            .filter(|&x| x > g.hole())
            .collect();
        breaks.push(g.hole());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        for pair in breaks.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let (ylo, yhi) = (libm::pow(hi, -alpha), libm::pow(lo, -alpha));
            total += q / alpha
                * rule.integrate_composite(ylo, yhi, pieces, |y| {
                    phi(g.eval(side * libm::pow(y, -1.0 / alpha)))
                });
        }
        let outer = *breaks.last().expect("hole is a break");
        let tail_value = if side > 0.0 { g.right_limit() } else { g.left_limit() };
        total += q / alpha * libm::pow(outer, -alpha) * phi(tail_value);
    }
    // ∫ e^{-λr} dr contributes 1/λ after u = e^{-λr}
    total / spec.lambda()
}

fn yule_laplace(spec: &LimitSpec, g: &TestFunction) -> Result<Estimate> {
    if !spec.cluster.branching.offspring.is_yule() {
        return Err(invalid("offspring", "Yule quadrature needs p2 = 1"));
    }
    let transform = |c: f64| -> Result<f64> {
        match &spec.w {
            WLaw::Exponential { mean } => Ok(1.0 / (1.0 + mean * c)),
            WLaw::Constant(w) => Ok(libm::exp(-w * c)),
            WLaw::Empirical(draws) if !draws.is_empty() => {
                Ok(draws.iter().map(|w| libm::exp(-w * c)).sum::<f64>() / draws.len() as f64)
            }
            _ => Err(invalid("w", "quadrature needs an explicit W law")),
        }
    };
    let coarse = transform(yule_exponent(spec, g, 8))?;
    let fine = transform(yule_exponent(spec, g, 16))?;
    Ok(Estimate {
        value: fine,
        half_width: (fine - coarse).abs(),
    })
}

fn conditioned_pair(spec: &LimitSpec, mu: f64) -> Result<(f64, f64)> {
    spec.w
        .conditioned_transform(mu)
        .ok_or_else(|| invalid("w", "law of W | W > 0 needs stored draws; see WLaw::conditioned_draws"))
}

/// `P(M₍₁₎ ≤ x)` on the survival event: `0` for `x ≤ 0`, otherwise
/// `E* exp(-α⁻¹ q₁ ϑ W x^{-α})`.
pub fn max_law_cdf(spec: &LimitSpec, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(conditioned_pair(spec, spec.right_intensity(x))?.0)
}

/// `P(M₍₂₎ ≤ x)` on the survival event, `E*[e^{-μW}(1 + μW P(T=1))]`.
///
/// The half-width propagates the uncertainty of a simulated `P(T = 1)`.
pub fn second_order_cdf(spec: &LimitSpec, x: f64) -> Result<Estimate> {
    if !(x > 0.0) {
        return Err(invalid("x", "must be positive"));
    }
    let p_one = spec
        .cluster
        .p_one()
        .ok_or_else(|| invalid("offspring", "P(T = 1) not estimated; see ClusterLaw::estimate_p_one"))?;
    let mu = spec.right_intensity(x);
    let (l0, l1) = conditioned_pair(spec, mu)?;
    let slope = mu * l1;
    Ok(Estimate {
        value: l0 + slope * p_one.value,
        half_width: slope * p_one.half_width,
    })
}

/// Confidence half-width for a proportion, used by callers comparing CDF
/// spot values.
pub fn proportion_half_width(p: f64, n: u64) -> f64 {
    Z95 * libm::sqrt(p * (1.0 - p) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::OffspringLaw;
    use crate::rng::replication_stream;

    fn yule_spec(alpha: f64) -> LimitSpec {
        let cfg = BranchingConfig::yule(1.0).unwrap();
        LimitSpec::new(
            TailScale::pure(alpha, 1.0, 1.0).unwrap(),
            1.0,
            WLaw::Exponential { mean: 1.0 },
            ClusterLaw::new(cfg),
        )
        .unwrap()
    }

    #[test]
    fn spot_values() {
        let spec = yule_spec(1.5);
        assert!((max_law_cdf(&spec, 1.0).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(max_law_cdf(&spec, -1.0).unwrap(), 0.0);
        assert_eq!(max_law_cdf(&spec, 0.0).unwrap(), 0.0);
        assert!(max_law_cdf(&spec, 1e12).unwrap() > 1.0 - 1e-12);
        let second = second_order_cdf(&spec, 1.0).unwrap();
        assert!((second.value - 0.72).abs() < 1e-12);
        assert_eq!(second.half_width, 0.0);
        for &x in &[0.1, 0.5, 1.0, 3.0, 10.0] {
            assert!(second_order_cdf(&spec, x).unwrap().value >= max_law_cdf(&spec, x).unwrap());
        }
    }

    #[test]
    fn max_law_against_density_quadrature() {
        // ∫₀^∞ e^{-μw} e^{-w} dw by Gauss-Legendre on a truncated range
        let spec = yule_spec(1.5);
        let rule = GaussLegendre::new(20);
        for &x in &[0.3, 1.0, 2.5] {
            let mu = spec.scale.right_tail(x);
            let direct = rule.integrate_composite(0.0, 60.0, 200, |w| libm::exp(-(1.0 + mu) * w));
            assert!((max_law_cdf(&spec, x).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn extinct_w_gives_empty_measure() {
        let mut spec = yule_spec(1.5);
        spec.w = WLaw::Constant(0.0);
        let mut rng = replication_stream(1, 0);
        for _ in 0..100 {
            assert!(sample_limit_process(&spec, 0.1, &mut rng).unwrap().is_empty());
        }
        assert!(sample_limit_process(&spec, 0.0, &mut rng).is_err());
    }

    #[test]
    fn mean_count_above_one() {
        let spec = yule_spec(1.5);
        let mut rng = replication_stream(2, 0);
        let mut atoms = MeanAccumulator::new();
        let mut uniform = Vec::new();
        for _ in 0..100_000 {
            let m = sample_limit_process(&spec, 0.5, &mut rng).unwrap();
            atoms.push(m.atoms().iter().filter(|&&(x, _)| x > 1.0).count() as f64);
            uniform.extend(m.atoms().iter().filter(|a| a.0 > 0.0).map(|a| libm::pow(a.0 / 0.5, -1.5)));
        }
        assert!((atoms.mean() - 2.0 / 3.0).abs() < 4.0 * atoms.standard_error());
        uniform.sort_by(f64::total_cmp);
        let n = uniform.len() as f64;
        let ks = uniform
            .iter()
            .enumerate()
            .map(|(i, &u)| (u - i as f64 / n).abs().max(((i + 1) as f64 / n - u).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / libm::sqrt(n));
    }

    #[test]
    fn counts_grow_like_a_power() {
        let spec = yule_spec(1.5);
        let mut rng = replication_stream(3, 0);
        let mut small = MeanAccumulator::new();
        let mut large = MeanAccumulator::new();
        for _ in 0..20_000 {
            let m = sample_limit_process(&spec, 0.1, &mut rng).unwrap();
            small.push(m.atoms().iter().filter(|a| a.0 > 0.1).count() as f64);
            large.push(m.atoms().iter().filter(|a| a.0 > 0.4).count() as f64);
        }
        // ratio (0.1/0.4)^{-1.5} = 8
        let ratio = small.mean() / large.mean();
        assert!((ratio - 8.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn conditional_poisson_dispersion() {
        let mut spec = yule_spec(1.5);
        spec.w = WLaw::Constant(2.0);
        let mut rng = replication_stream(4, 0);
        let mut near = MeanAccumulator::new();
        let mut far = MeanAccumulator::new();
        let mut cross = 0.0;
        let n = 40_000;
        for _ in 0..n {
            let m = sample_limit_process(&spec, 0.5, &mut rng).unwrap();
            let a = m.atoms().iter().filter(|x| x.0.abs() < 1.0).count() as f64;
            let b = m.atoms().iter().filter(|x| x.0.abs() >= 1.0).count() as f64;
            near.push(a);
            far.push(b);
            cross += a * b;
        }
        let target_near = 2.0 * (spec.scale.two_sided_tail(0.5) - spec.scale.two_sided_tail(1.0));
        assert!((near.mean() - target_near).abs() < 4.0 * near.standard_error());
        assert!((near.variance() / near.mean() - 1.0).abs() < 0.05);
        assert!((far.variance() / far.mean() - 1.0).abs() < 0.05);
        let cov = cross / n as f64 - near.mean() * far.mean();
        assert!(cov.abs() < 0.05 * libm::sqrt(near.variance() * far.variance()));
    }

    #[test]
    fn zero_test_function_is_one() {
        let spec = yule_spec(1.5);
        let mut rng = replication_stream(5, 0);
        let g = TestFunction::zero();
        for mode in [LaplaceMode::YuleQuadrature, LaplaceMode::NestedMonteCarlo { outer: 10, inner: 10 }] {
            assert_eq!(laplace_limit(&spec, &g, mode, &mut rng).unwrap(), Estimate::exact(1.0));
        }
    }

    #[test]
    fn inner_integral_against_geometric_quadrature() {
        let rule = GaussLegendre::new(QUADRATURE_NODES);
        for &v in &[0.05, 0.5, 2.0, 30.0] {
            let z = libm::exp(-v);
            let direct = rule.integrate_composite(0.0, 1.0, 64, |u| 1.0 - u * z / (1.0 - (1.0 - u) * z));
            assert!((yule_inner(v) - direct).abs() < 1e-9, "{v}");
        }
        // -v log v to leading order
        let v = 1e-9;
        assert!((yule_inner(v) / (-v * libm::log(v)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn large_plateau_limit() {
        // b·1_{[a,∞)}-like ramp with b large: 1/(1 + ϑ q₁ a^{-α} / α)
        let spec = yule_spec(1.5);
        let a = 1.0;
        let g = TestFunction::new(alloc::vec![(a, 0.0), (a * (1.0 + 1e-9), 200.0)], a).unwrap();
        let est = laplace_limit(&spec, &g, LaplaceMode::YuleQuadrature, &mut replication_stream(0, 0)).unwrap();
        let target = 1.0 / (1.0 + spec.scale.right_tail(a));
        assert!((est.value - target).abs() < 1e-6, "{} {}", est.value, target);
    }

    #[test]
    fn quadrature_against_series_oracle() {
        // E(1 - e^{-T g}) with P(T=k) = 1/(k(k+1)) summed directly, then
        // integrated over x on a fine trapezoid grid
        let spec = yule_spec(1.5);
        let g = TestFunction::new(alloc::vec![(1.0, 0.0), (2.0, 1.0), (3.0, 0.0)], 1.0).unwrap();
        let series = |v: f64| -> f64 {
            (1..200_000u64)
                .map(|k| (1.0 - libm::exp(-(k as f64) * v)) / (k as f64 * (k as f64 + 1.0)))
                .sum()
        };
        let n = 2000;
        let mut c = 0.0;
        for i in 0..n {
            let x0 = 1.0 + 2.0 * i as f64 / n as f64;
            let x1 = x0 + 2.0 / n as f64;
            let f = |x: f64| series(g.eval(x)) * libm::pow(x, -2.5);
            c += 0.5 * (f(x0) + f(x1)) * (x1 - x0);
        }
        let target = 1.0 / (1.0 + c);
        let est = laplace_limit(&spec, &g, LaplaceMode::YuleQuadrature, &mut replication_stream(0, 0)).unwrap();
        assert!((est.value - target).abs() < 1e-5, "{} {}", est.value, target);
    }

    #[test]
    fn sampler_nested_and_quadrature_agree() {
        let spec = yule_spec(1.5);
        let gs = [
            TestFunction::ramp_up(0.5, 1.5, 1.0).unwrap(),
            TestFunction::tent(1.0, 3.0, 2.0).unwrap(),
            TestFunction::new(alloc::vec![(-2.0, 1.0), (-0.8, 0.0), (0.8, 0.0), (2.0, 0.5)], 0.8).unwrap(),
        ];
        let mut rng = replication_stream(6, 0);
        for g in &gs {
            let quad = laplace_limit(&spec, g, LaplaceMode::YuleQuadrature, &mut rng).unwrap();
            let nested = laplace_limit(&spec, g, LaplaceMode::NestedMonteCarlo { outer: 4000, inner: 200 }, &mut rng).unwrap();
            let sampled: MeanAccumulator = (0..100_000)
                .map(|_| libm::exp(-sample_limit_process(&spec, 0.5 * g.hole(), &mut rng).unwrap().evaluate(g)))
                .collect();
            let sampled = sampled.estimate();
            assert!(sampled.overlaps(&quad), "{sampled:?} {quad:?}");
            assert!(nested.overlaps(&quad) || (nested.value - quad.value).abs() < 3e-3, "{nested:?} {quad:?}");
        }
    }

    #[test]
    fn simulated_laws_need_draws() {
        let cfg = BranchingConfig::new(OffspringLaw::new(&[0.2, 0.0, 0.8]).unwrap(), 1.0).unwrap();
        let mut spec = LimitSpec::from_model(&cfg, &MotionSpec::symmetric_stable(1.5, 1.0)).unwrap();
        assert!(max_law_cdf(&spec, 1.0).is_err());
        assert!(second_order_cdf(&spec, 1.0).is_err());
        let mut rng = replication_stream(7, 0);
        spec.w = spec.w.conditioned_draws(2000, &mut rng).unwrap();
        spec.cluster.estimate_p_one(20_000, &mut rng).unwrap();
        let f1 = max_law_cdf(&spec, 1.0).unwrap();
        let f2 = second_order_cdf(&spec, 1.0).unwrap();
        assert!(f1 > 0.0 && f1 < 1.0);
        assert!(f2.value >= f1);
        assert!(f2.half_width > 0.0);
    }

    #[test]
    fn theta_bounded_by_inverse_lambda() {
        let cfg = BranchingConfig::yule(1.0).unwrap();
        assert!(LimitSpec::new(
            TailScale::pure(1.5, 1.0, 1.0).unwrap(),
            1.5,
            WLaw::Exponential { mean: 1.0 },
            ClusterLaw::new(cfg),
        )
        .is_err());
    }
}
