//! Continuous-time Galton–Watson skeleton.
//!
//! Each particle lives an Exponential(β) lifetime and is replaced by `k`
//! children with probability `p_k`. The Malthusian parameter is
//! `λ = β(m - 1)` and `e^{-λt} Z_t → W` almost surely.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{exponential, open01};
use crate::stats::{Estimate, MeanAccumulator};

/// Largest supported offspring count.
pub const MAX_OFFSPRING: usize = 64;

/// Default cap on the number of simultaneously live particles.
pub const DEFAULT_POPULATION_CAP: u64 = 100_000_000;

/// Finite-support reproduction law `{p_k}` with mean `m > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl OffspringLaw {
    /// `probs[k] = p_k`. The list is renormalized if it sums to 1 within
    /// `1e-9`; trailing zeros are dropped.
    pub fn new(probs: &[f64]) -> Result<Self> {
        let mut probs: Vec<f64> = probs.to_vec();
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(invalid("offspring", "probability list is empty"));
        }
        if probs.len() > MAX_OFFSPRING + 1 {
            return Err(invalid("offspring", "support must be within 0..=64"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("offspring", "probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "offspring",
                alloc::format!("probabilities sum to {total}, not 1"),
            ));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if !(mean > 1.0 + 1e-12) {
            return Err(invalid(
                "offspring",
                alloc::format!("mean offspring {mean} must exceed 1 (supercritical)"),
            ));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative })
    }

    /// Binary splitting, `p₂ = 1`.
    pub fn yule() -> Self {
        Self::new(&[0.0, 0.0, 1.0]).expect("valid law")
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `f(s) = Σ p_k s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    fn pgf_derivative(&self, s: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * s + k as f64 * p)
    }

    pub fn is_yule(&self) -> bool {
        self.probs.len() == 3 && self.probs[2] == 1.0
    }

    /// `(p₀, p₂)` when the support lies in `{0, 1, 2}`.
    pub fn binary_rates(&self) -> Option<(f64, f64)> {
        (self.probs.len() <= 3).then(|| (self.p(0), self.p(2)))
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.probs.len() - 1)
    }
}

/// Offspring law plus branching rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingConfig {
    pub offspring: OffspringLaw,
    pub beta: f64,
    pub population_cap: u64,
}

impl BranchingConfig {
    pub fn new(offspring: OffspringLaw, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid("beta", "branching rate must be positive and finite"));
        }
        Ok(Self {
            offspring,
            beta,
            population_cap: DEFAULT_POPULATION_CAP,
        })
    }

    pub fn yule(beta: f64) -> Result<Self> {
        Self::new(OffspringLaw::yule(), beta)
    }

    pub fn with_population_cap(mut self, cap: u64) -> Self {
        self.population_cap = cap;
        self
    }

    /// `λ = β(m - 1)`.
    pub fn lambda(&self) -> f64 {
        self.beta * (self.offspring.mean() - 1.0)
    }

    /// `P(Z_t = 0)` from the backward Kolmogorov equation
    /// `q' = β(f(q) - q)`, `q(0) = 0`, integrated with RK4.
    pub fn extinct_by(&self, t: f64) -> f64 {
        if self.offspring.p(0) == 0.0 || t <= 0.0 {
            return 0.0;
        }
        if let Some(closed) = self.binary_extinct_by(t) {
            return closed;
        }
        let steps = (libm::ceil(t * self.beta * 200.0) as usize).max(200);
        let h = t / steps as f64;
        let rhs = |q: f64| self.beta * (self.offspring.pgf(q) - q);
        let mut q = 0.0;
        for _ in 0..steps {
            let k1 = rhs(q);
            let k2 = rhs(q + 0.5 * h * k1);
            let k3 = rhs(q + 0.5 * h * k2);
            let k4 = rhs(q + h * k3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        q
    }

    /// Linear birth–death closed form: with birth rate `b = βp₂`, death
    /// rate `d = βp₀` and `E = e^{(b-d)t}`, `P(Z_t = 0) = d(E-1)/(bE-d)` and,
    /// given survival, `Z_t` is geometric with ratio `b(E-1)/(bE-d)`.
    fn binary_parameters(&self, t: f64) -> Option<(f64, f64)> {
        let (p0, p2) = self.offspring.binary_rates()?;
        let b = self.beta * p2;
        let d = self.beta * p0;
        let growth = libm::expm1((b - d) * t);
        let denom = b * growth + (b - d);
        Some((d * growth / denom, b * growth / denom))
    }

    fn binary_extinct_by(&self, t: f64) -> Option<f64> {
        self.binary_parameters(t).map(|(ext, _)| ext)
    }

    /// `P(Z_t = k)` for laws supported on `{0, 1, 2}`.
    pub fn population_pmf(&self, t: f64, k: u64) -> Option<f64> {
        let (ext, ratio) = self.binary_parameters(t.max(0.0))?;
        Some(match k {
            0 => ext,
            _ => (1.0 - ext) * (1.0 - ratio) * libm::pow(ratio, (k - 1) as f64),
        })
    }
}

/// Event-driven simulation of `Z_t` starting from one particle.
///
/// The total branching rate is `βZ`; every event replaces one particle by
/// a draw from the offspring law.
pub fn simulate_population<R: Rng + ?Sized>(cfg: &BranchingConfig, t: f64, rng: &mut R) -> Result<u64> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    let mut z: u64 = 1;
    let mut now = 0.0;
    loop {
        now += exponential(rng, cfg.beta * z as f64);
        if now > t {
            return Ok(z);
        }
        let k = cfg.offspring.sample(rng) as u64;
        z = z - 1 + k;
        if z == 0 {
            return Ok(0);
        }
        if z > cfg.population_cap {
            return Err(Error::PopulationExplosion {
                cap: cfg.population_cap,
                time: now,
            });
        }
    }
}

/// An exact draw of `Z_t`: closed form for laws supported on `{0, 1, 2}`,
/// otherwise [`simulate_population`].
pub fn draw_population<R: Rng + ?Sized>(cfg: &BranchingConfig, t: f64, rng: &mut R) -> Result<u64> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    match cfg.binary_parameters(t) {
        Some((ext, ratio)) => {
            if open01(rng) < ext {
                return Ok(0);
            }
            if ratio <= 0.0 {
                return Ok(1);
            }
            let n = libm::floor(libm::log(open01(rng)) / libm::log(ratio));
            Ok(1 + n.min(u64::MAX as f64 / 2.0) as u64)
        }
        None => simulate_population(cfg, t, rng),
    }
}

/// Smallest fixed point of the generating function in `[0, 1)`.
///
/// Monotone iteration from 0, polished by Newton steps (which approach the
/// root from below because `f(s) - s` is convex).
pub fn extinction_probability(law: &OffspringLaw) -> f64 {
    if law.p(0) == 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for _ in 0..10_000_000 {
        let next = law.pgf(s);
        let done = (next - s).abs() < 1e-12;
        s = next;
        if done {
            break;
        }
    }
    for _ in 0..8 {
        let slope = law.pgf_derivative(s) - 1.0;
        if slope >= 0.0 {
            break;
        }
        let next = s - (law.pgf(s) - s) / slope;
        if !(next >= s) || next >= 1.0 {
            break;
        }
        s = next;
    }
    s
}

/// Default truncation horizon for `W`: `max(12/λ, t)` with `e^{λt} = 10⁴`.
pub fn default_w_horizon(cfg: &BranchingConfig) -> f64 {
    let lambda = cfg.lambda();
    (12.0 / lambda).max(libm::log(1e4) / lambda)
}

/// `e^{-λ t_W} Z_{t_W}`, a truncation approximation of `W`.
pub fn sample_w<R: Rng + ?Sized>(cfg: &BranchingConfig, horizon: f64, rng: &mut R) -> Result<f64> {
    let z = draw_population(cfg, horizon, rng)?;
    Ok(libm::exp(-cfg.lambda() * horizon) * z as f64)
}

/// How to obtain `ϑ = ∫₀^∞ e^{-λr} P(Z_r > 0) dr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    /// `1/λ` when `p₀ = 0`; otherwise quadrature of the Kolmogorov
    /// equation's survival probability.
    Analytic,
    /// Simulated extinction times. Each replication contributes
    /// `(1 - e^{-λ min(τ, r_max)})/λ`, which integrates the indicator
    /// `1{r < τ}` against `e^{-λr}` exactly.
    MonteCarlo { replications: u64, r_max: f64 },
}

pub fn theta_constant<R: Rng + ?Sized>(cfg: &BranchingConfig, mode: ThetaMode, rng: &mut R) -> Result<Estimate> {
    let lambda = cfg.lambda();
    if cfg.offspring.p(0) == 0.0 {
        return Ok(Estimate::exact(1.0 / lambda));
    }
    match mode {
        ThetaMode::Analytic => Ok(theta_by_quadrature(cfg)),
        ThetaMode::MonteCarlo { replications, r_max } => {
            if libm::exp(-lambda * r_max) >= 1e-6 {
                return Err(invalid("r_max", "needs exp(-lambda * r_max) < 1e-6"));
            }
            if replications < 2 {
                return Err(invalid("replications", "need at least two"));
            }
            // once Z reaches `safe`, extinction before r_max has probability
            // below q^safe < 1e-12
            let q = extinction_probability(&cfg.offspring);
            let safe = libm::ceil(libm::log(1e-12) / libm::log(q)).max(1.0) as u64;
            let mut acc = MeanAccumulator::new();
            for _ in 0..replications {
                let tau = extinction_time(cfg, r_max, safe, rng)?;
                acc.push(-libm::expm1(-lambda * tau.min(r_max)) / lambda);
            }
            Ok(acc.estimate())
        }
    }
}

/// Time of extinction, or infinity once the population reaches `safe` or
/// survives past `horizon`.
fn extinction_time<R: Rng + ?Sized>(cfg: &BranchingConfig, horizon: f64, safe: u64, rng: &mut R) -> Result<f64> {
    let mut z: u64 = 1;
    let mut now = 0.0;
    loop {
        now += exponential(rng, cfg.beta * z as f64);
        if now > horizon || z >= safe {
            return Ok(f64::INFINITY);
        }
        z = z - 1 + cfg.offspring.sample(rng) as u64;
        if z == 0 {
            return Ok(now);
        }
    }
}

fn theta_by_quadrature(cfg: &BranchingConfig) -> Estimate {
    // substitute u = e^{-λr}: ϑ = (1/λ) ∫₀¹ P(Z_{r(u)} > 0) du
    let coarse = survival_quadrature(cfg, 2000);
    let fine = survival_quadrature(cfg, 4000);
    Estimate {
        value: fine,
        half_width: (fine - coarse).abs(),
    }
}

fn survival_quadrature(cfg: &BranchingConfig, steps: usize) -> f64 {
    // march the Kolmogorov ODE in r and integrate e^{-λr}(1 - q(r)) with
    // Simpson's rule on [0, r_max]; the remainder beyond r_max is
    // (1 - q∞) e^{-λ r_max}/λ
    let lambda = cfg.lambda();
    let r_max = 40.0 / lambda;
    let n = steps * 2;
    let h = r_max / n as f64;
    let rhs = |q: f64| cfg.beta * (cfg.offspring.pgf(q) - q);
    let sub = 8;
    let mut q = 0.0;
    let mut total = 0.0;
    for i in 0..=n {
        let r = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * libm::exp(-lambda * r) * (1.0 - q);
        let dh = h / sub as f64;
        for _ in 0..sub {
            let k1 = rhs(q);
            let k2 = rhs(q + 0.5 * dh * k1);
            let k3 = rhs(q + 0.5 * dh * k2);
            let k4 = rhs(q + dh * k3);
            q += dh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    let q_inf = extinction_probability(&cfg.offspring);
    total * h / 3.0 + (1.0 - q_inf) * libm::exp(-lambda * r_max) / lambda
}

/// How to draw the cluster size `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterMode {
    /// Inverse CDF `P(T ≥ k) = 1/k` for the Yule law, rejection otherwise.
    #[default]
    Auto,
    /// Always use the conditional-time representation.
    Rejection,
}

/// Attempts allowed before the rejection loop gives up.
pub const CLUSTER_REJECTION_CAP: u64 = 1_000_000;

/// One draw from `P(T = k) = ϑ⁻¹ ∫₀^∞ e^{-λr} P(Z_r = k) dr`, `k ≥ 1`.
///
/// Rejection form: propose `R ~ Exponential(λ)`, run the population to `R`
/// and accept `T = Z_R` when it is positive. The accepted pair has density
/// proportional to `e^{-λr} P(Z_r = k)`.
pub fn sample_cluster_size<R: Rng + ?Sized>(cfg: &BranchingConfig, mode: ClusterMode, rng: &mut R) -> Result<u64> {
    if mode == ClusterMode::Auto && cfg.offspring.is_yule() {
        let k = libm::floor(1.0 / open01(rng));
        return Ok(if k >= u64::MAX as f64 { u64::MAX } else { k as u64 });
    }
    let lambda = cfg.lambda();
    for _ in 0..CLUSTER_REJECTION_CAP {
        let r = exponential(rng, lambda);
        let z = draw_population(cfg, r, rng)?;
        if z > 0 {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        what: "cluster-size rejection sampler",
        iterations: CLUSTER_REJECTION_CAP,
    })
}

/// `[P(T = 1), …, P(T = k_max)]` for laws supported on `{0, 1, 2}`, by
/// quadrature of `ϑ⁻¹ ∫₀^∞ e^{-λr} P(Z_r = k) dr` after `u = e^{-λr}`.
pub fn cluster_pmf(cfg: &BranchingConfig, k_max: u64) -> Option<Vec<f64>> {
    cfg.offspring.binary_rates()?;
    let lambda = cfg.lambda();
    let theta = theta_by_quadrature(cfg).value;
    let rule = crate::special::GaussLegendre::new(20);
    let pmf = (1..=k_max)
        .map(|k| {
            let integral = rule.integrate_composite(0.0, 1.0, 64, |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                cfg.population_pmf(-libm::log(u) / lambda, k).unwrap_or(0.0)
            });
            integral / (lambda * theta)
        })
        .collect();
    Some(pmf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replication_stream;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn law(p: &[f64]) -> OffspringLaw {
        OffspringLaw::new(p).unwrap()
    }

    fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
        let stat: f64 = observed
            .iter()
            .zip(expected)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum();
        1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn rejects_subcritical_and_bad_lists() {
        assert!(OffspringLaw::new(&[0.5, 0.5]).is_err());
        assert!(OffspringLaw::new(&[0.5, 0.6]).is_err());
        assert!(OffspringLaw::new(&[-0.1, 0.1, 1.0]).is_err());
        assert!(OffspringLaw::new(&[0.0; 70]).is_err());
        assert!(BranchingConfig::new(OffspringLaw::yule(), -1.0).is_err());
    }

    #[test]
    fn lambda_is_derived() {
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 2.0).unwrap();
        assert!((cfg.lambda() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extinction_probabilities() {
        assert_eq!(extinction_probability(&OffspringLaw::yule()), 0.0);
        let q = extinction_probability(&law(&[0.25, 0.0, 0.75]));
        assert!((q - 1.0 / 3.0).abs() < 1e-12);
        let q = extinction_probability(&law(&[0.2, 0.2, 0.6]));
        assert!((q - 1.0 / 3.0).abs() < 1e-12);
        for p in [&[0.25, 0.0, 0.75][..], &[0.3, 0.3, 0.0, 0.2, 0.2], &[0.45, 0.05, 0.5]] {
            let l = law(p);
            let q = extinction_probability(&l);
            assert!((l.pgf(q) - q).abs() < 1e-10);
            assert!(q < 1.0);
        }
    }

    #[test]
    fn population_at_zero_is_one() {
        let mut rng = replication_stream(1, 0);
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0).unwrap();
        assert_eq!(simulate_population(&cfg, 0.0, &mut rng).unwrap(), 1);
        assert_eq!(draw_population(&cfg, 0.0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn population_cap_aborts() {
        let mut rng = replication_stream(1, 0);
        let cfg = BranchingConfig::yule(1.0).unwrap().with_population_cap(50);
        let err = simulate_population(&cfg, 20.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::PopulationExplosion { cap: 50, .. }));
    }

    #[test]
    fn yule_population_is_geometric() {
        let cfg = BranchingConfig::yule(1.0).unwrap();
        let t = 1.0;
        let p = libm::exp(-t);
        let n = 100_000;
        let bins = 12;
        let mut counts = alloc::vec![0u64; bins + 1];
        for i in 0..n {
            let mut rng = replication_stream(11, i);
            let z = simulate_population(&cfg, t, &mut rng).unwrap() as usize;
            counts[(z - 1).min(bins)] += 1;
        }
        let mut expected: Vec<f64> = (1..=bins)
            .map(|k| n as f64 * p * (1.0 - p).powi(k as i32 - 1))
            .collect();
        expected.push(n as f64 - expected.iter().sum::<f64>());
        assert!(chi_square_p(&counts, &expected) > 0.01);
    }

    #[test]
    fn closed_form_matches_event_simulation() {
        // compare the two exact routes for a birth–death law
        let cfg = BranchingConfig::new(law(&[0.2, 0.2, 0.6]), 1.3).unwrap();
        let t = 1.5;
        let n = 40_000;
        let bins = 10;
        let mut a = alloc::vec![0u64; bins + 1];
        let mut b = alloc::vec![0u64; bins + 1];
        for i in 0..n {
            let mut r1 = replication_stream(3, i);
            let mut r2 = replication_stream(4, i);
            a[(simulate_population(&cfg, t, &mut r1).unwrap() as usize).min(bins)] += 1;
            b[(draw_population(&cfg, t, &mut r2).unwrap() as usize).min(bins)] += 1;
        }
        // two-sample chi-square
        let stat: f64 = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| **x + **y > 0)
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2) / (x + y) as f64)
            .sum();
        let df = a.iter().zip(&b).filter(|(x, y)| **x + **y > 0).count() - 1;
        let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn mean_growth_matches_malthusian_rate() {
        let cfg = BranchingConfig::new(law(&[0.1, 0.3, 0.3, 0.3]), 1.0).unwrap();
        let lambda = cfg.lambda();
        for &t in &[1.0, 2.0, 4.0] {
            let acc: MeanAccumulator = (0..100_000u64)
                .map(|i| {
                    let mut rng = replication_stream(21, i);
                    simulate_population(&cfg, t, &mut rng).unwrap() as f64
                })
                .collect();
            let target = libm::exp(lambda * t);
            assert!(
                (acc.mean() - target).abs() < 4.0 * acc.standard_error(),
                "t={t}: {} vs {target}",
                acc.mean()
            );
        }
    }

    #[test]
    fn branching_property_two_stage() {
        // Z_{t+s} against a sum of Z_t independent copies of Z_s
        let cfg = BranchingConfig::new(law(&[0.2, 0.1, 0.5, 0.2]), 1.0).unwrap();
        let (t, s) = (0.7, 0.8);
        let n = 30_000;
        let bins = 14;
        let mut direct = alloc::vec![0u64; bins + 1];
        let mut staged = alloc::vec![0u64; bins + 1];
        for i in 0..n {
            let mut rng = replication_stream(31, i);
            let z = simulate_population(&cfg, t + s, &mut rng).unwrap() as usize;
            direct[z.min(bins)] += 1;
            let mut rng = replication_stream(32, i);
            let first = simulate_population(&cfg, t, &mut rng).unwrap();
            let total: u64 = (0..first)
                .map(|_| simulate_population(&cfg, s, &mut rng).unwrap())
                .sum();
            staged[(total as usize).min(bins)] += 1;
        }
        let live: Vec<(u64, u64)> = direct
            .iter()
            .zip(&staged)
            .filter(|(a, b)| **a + **b > 0)
            .map(|(a, b)| (*a, *b))
            .collect();
        let stat: f64 = live
            .iter()
            .map(|&(a, b)| (a as f64 - b as f64).powi(2) / (a + b) as f64)
            .sum();
        let p = 1.0 - ChiSquared::new((live.len() - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn extinct_fraction_matches_fixed_point() {
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0)
            .unwrap()
            .with_population_cap(200);
        let n = 40_000u64;
        let extinct = (0..n)
            .filter(|&i| {
                let mut rng = replication_stream(41, i);
                // long horizon, population capped well above the safe size
                simulate_population(&cfg, 30.0, &mut rng).is_ok_and(|z| z == 0)
            })
            .count() as f64;
        let frac = extinct / n as f64;
        let se = (frac * (1.0 - frac) / n as f64).sqrt();
        assert!((frac - 1.0 / 3.0).abs() < 3.0 * se, "{frac}");
    }

    #[test]
    fn w_for_yule_is_unit_exponential() {
        let cfg = BranchingConfig::yule(1.0).unwrap();
        let n = 100_000;
        let mut w: Vec<f64> = (0..n)
            .map(|i| sample_w(&cfg, 12.0, &mut replication_stream(51, i)).unwrap())
            .collect();
        w.sort_by(f64::total_cmp);
        let ks = w
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "ks = {ks}");
        let mean = w.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn w_vanishes_with_extinction_probability() {
        let cfg = BranchingConfig::new(law(&[0.2, 0.2, 0.6]), 1.0).unwrap();
        let horizon = default_w_horizon(&cfg);
        let n = 20_000u64;
        let zeros = (0..n)
            .filter(|&i| sample_w(&cfg, horizon, &mut replication_stream(61, i)).unwrap() == 0.0)
            .count() as f64
            / n as f64;
        let se = (zeros * (1.0 - zeros) / n as f64).sqrt();
        assert!((zeros - 1.0 / 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn w_mean_is_one_without_deaths() {
        let cfg = BranchingConfig::new(law(&[0.0, 0.5, 0.0, 0.5]), 1.0).unwrap();
        // event-driven route (support beyond 2), moderate horizon
        let acc: MeanAccumulator = (0..20_000u64)
            .map(|i| sample_w(&cfg, 5.0, &mut replication_stream(71, i)).unwrap())
            .collect();
        assert!((acc.mean() - 1.0).abs() < 3.0 * acc.standard_error());
    }

    #[test]
    fn theta_without_deaths_is_inverse_lambda() {
        let mut rng = replication_stream(0, 0);
        for beta in [0.5, 1.0, 3.0] {
            let cfg = BranchingConfig::yule(beta).unwrap();
            let th = theta_constant(&cfg, ThetaMode::Analytic, &mut rng).unwrap();
            assert_eq!(th.value, 1.0 / beta);
            assert_eq!(th.half_width, 0.0);
        }
    }

    #[test]
    fn theta_with_deaths_is_bracketed_and_routes_agree() {
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0).unwrap();
        let lambda = cfg.lambda();
        let mut rng = replication_stream(81, 0);
        let analytic = theta_constant(&cfg, ThetaMode::Analytic, &mut rng).unwrap();
        assert!(analytic.value > 0.0 && analytic.value < 1.0 / lambda);
        // independent route: closed-form survival of the birth–death process
        let rule = crate::special::GaussLegendre::new(30);
        let oracle = rule.integrate_composite(0.0, 1.0, 50, |u| {
            if u == 0.0 {
                return 1.0 - 1.0 / 3.0;
            }
            let r = -libm::log(u) / lambda;
            let b = 0.75;
            let d = 0.25;
            let e = libm::expm1((b - d) * r);
            1.0 - d * e / (b * e + (b - d))
        }) / lambda;
        assert!((analytic.value - oracle).abs() < 1e-8, "{} vs {oracle}", analytic.value);
        let mc = theta_constant(
            &cfg,
            ThetaMode::MonteCarlo {
                replications: 50_000,
                r_max: 30.0,
            },
            &mut rng,
        )
        .unwrap();
        assert!(mc.value > 0.0 && mc.value < 1.0 / lambda);
        assert!((mc.value - oracle).abs() < 4.0 * mc.standard_error());
        assert!(theta_constant(
            &cfg,
            ThetaMode::MonteCarlo {
                replications: 10,
                r_max: 2.0
            },
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn kolmogorov_equation_matches_closed_form() {
        // general-law ODE route against the birth–death formula
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0).unwrap();
        let rhs = |q: f64| cfg.beta * (cfg.offspring.pgf(q) - q);
        let mut q = 0.0;
        let h = 1e-3;
        for _ in 0..2000 {
            let k1 = rhs(q);
            let k2 = rhs(q + 0.5 * h * k1);
            let k3 = rhs(q + 0.5 * h * k2);
            let k4 = rhs(q + h * k3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((q - cfg.extinct_by(2.0)).abs() < 1e-10);
    }

    /// `ϑ⁻¹ ∫₀^∞ e^{-r} P(Z_r = k) dr` with the Yule geometric law, by
    /// quadrature in `u = e^{-r}`.
    fn yule_cluster_pmf_by_quadrature(k: u32) -> f64 {
        let rule = crate::special::GaussLegendre::new(40);
        rule.integrate_composite(0.0, 1.0, 20, |u| u * (1.0 - u).powi(k as i32 - 1))
    }

    #[test]
    fn yule_cluster_law_oracle() {
        for (k, expected) in [(1, 0.5), (2, 1.0 / 6.0), (3, 1.0 / 12.0)] {
            assert!((yule_cluster_pmf_by_quadrature(k) - expected).abs() < 1e-12);
        }
    }

    fn cluster_histogram(cfg: &BranchingConfig, mode: ClusterMode, n: u64, seed: u64) -> Vec<u64> {
        let bins = 20;
        let mut counts = alloc::vec![0u64; bins + 1];
        for i in 0..n {
            let t = sample_cluster_size(cfg, mode, &mut replication_stream(seed, i)).unwrap();
            assert!(t >= 1);
            counts[(t as usize - 1).min(bins)] += 1;
        }
        counts
    }

    fn yule_expected(n: u64) -> Vec<f64> {
        let mut e: Vec<f64> = (1..=20u32)
            .map(|k| n as f64 * yule_cluster_pmf_by_quadrature(k))
            .collect();
        e.push(n as f64 - e.iter().sum::<f64>());
        e
    }

    #[test]
    fn yule_cluster_sizes_inverse_cdf() {
        let cfg = BranchingConfig::yule(1.0).unwrap();
        let n = 100_000;
        let counts = cluster_histogram(&cfg, ClusterMode::Auto, n, 91);
        assert_eq!(counts.iter().sum::<u64>(), n);
        assert!(chi_square_p(&counts, &yule_expected(n)) > 0.01);
    }

    #[test]
    fn yule_cluster_sizes_by_rejection() {
        let cfg = BranchingConfig::yule(2.0).unwrap();
        let n = 50_000;
        let counts = cluster_histogram(&cfg, ClusterMode::Rejection, n, 92);
        assert!(chi_square_p(&counts, &yule_expected(n)) > 0.01);
    }

    #[test]
    fn cluster_sizes_with_deaths_are_positive() {
        let cfg = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0).unwrap();
        let mut rng = replication_stream(93, 0);
        for _ in 0..2000 {
            assert!(sample_cluster_size(&cfg, ClusterMode::Auto, &mut rng).unwrap() >= 1);
        }
    }

    #[test]
    fn cluster_pmf_by_quadrature() {
        let yule = BranchingConfig::yule(1.5).unwrap();
        for (i, p) in cluster_pmf(&yule, 20).unwrap().iter().enumerate() {
            let k = (i + 1) as f64;
            assert!((p - 1.0 / (k * (k + 1.0))).abs() < 1e-10);
        }
        let deaths = BranchingConfig::new(law(&[0.25, 0.0, 0.75]), 1.0).unwrap();
        let total: f64 = cluster_pmf(&deaths, 4000).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        assert!(cluster_pmf(&BranchingConfig::new(law(&[0.1, 0.0, 0.0, 0.9]), 1.0).unwrap(), 1).is_none());
    }

    #[test]
    fn population_pmf_sums_to_one() {
        let cfg = BranchingConfig::new(law(&[0.2, 0.1, 0.7]), 1.0).unwrap();
        let total: f64 = (0..10_000u64).map(|k| cfg.population_pmf(2.0, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((cfg.population_pmf(2.0, 0).unwrap() - cfg.extinct_by(2.0)).abs() < 1e-15);
    }
}
