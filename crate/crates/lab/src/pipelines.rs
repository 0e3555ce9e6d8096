//! Experiment pipelines behind the subcommands. Each returns a typed report
//! and can render itself as CSV tables plus a human-readable summary.

use std::fmt::Write as _;

use anyhow::Context;
use bralev_core::branching::{cluster_pmf, sample_cluster_size, ClusterMode};
use bralev_core::kpp::{band_sups, front_position, Front, KppWeight, TreeBatch};
use bralev_core::limit::{
    laplace_limit, max_law_cdf, sample_limit_process, second_order_cdf, ClusterLaw, LaplaceMode, LimitSpec, WLaw,
};
use bralev_core::measure::top_n;
use bralev_core::normalization::compute_h;
use bralev_core::rng::{derive_seed, replication_stream};
use bralev_core::stats::{Estimate, MeanAccumulator, Z95};
use bralev_core::tree::{default_rho, simulate_tree_with};
use bralev_core::TestFunction;

use crate::config::{Config, Model};
use crate::output::{num, Table};
use crate::runner::Runner;
use crate::verify::{
    chi_square_gof, convergence_report, ks_distance, ks_distance_censored, ks_standard_error, laplace_compare_values, proportion,
    regression_slope, ChiSquare, LaplaceReport, TrendReport,
};

/// Tables, a text summary and an overall verdict.
pub struct Outcome {
    pub tables: Vec<(&'static str, Table)>,
    pub summary: String,
    pub pass: bool,
}

mod stage {
    pub const SIMULATE: u64 = 1;
    pub const MAX: u64 = 2;
    pub const LAPLACE: u64 = 3;
    pub const LIMIT: u64 = 4;
    pub const CLUSTER: u64 = 5;
    pub const FRONT: u64 = 6;
    pub const JUMPS: u64 = 7;
    pub const MANY_TO_ONE: u64 = 8;
    pub const TAIL: u64 = 9;
    pub const W_DRAWS: u64 = 10;
    pub const P_ONE: u64 = 11;
    pub const NESTED: u64 = 12;
}

fn stage_at(stage: u64, t: f64) -> u64 {
    (stage << 48) ^ t.to_bits()
}

fn parse_tests(cfg: &Config) -> anyhow::Result<Vec<(String, TestFunction)>> {
    cfg.experiment
        .test_functions
        .iter()
        .map(|s| {
            TestFunction::new(s.knots.clone(), s.hole)
                .map(|g| (s.name.clone(), g))
                .with_context(|| format!("experiment.test_functions `{}`", s.name))
        })
        .collect()
}

/// The limit object for a model. `W | W > 0` and `P(T = 1)` are simulated
/// when they have no closed form.
pub fn limit_spec(cfg: &Config, model: &Model, runner: &Runner) -> anyhow::Result<LimitSpec> {
    let mut w = WLaw::for_branching(&model.branching);
    let mut cluster = ClusterLaw::new(model.branching.clone());
    if w.conditioned_transform(1.0).is_none() {
        let mut rng = replication_stream(derive_seed(runner.seed(), stage::W_DRAWS), 0);
        w = w.conditioned_draws(cfg.experiment.w_draws as usize, &mut rng)?;
    }
    if cluster.p_one().is_none() {
        let mut rng = replication_stream(derive_seed(runner.seed(), stage::P_ONE), 0);
        cluster.estimate_p_one(cfg.experiment.cluster_draws, &mut rng)?;
    }
    Ok(LimitSpec::new(model.scale, model.theta, w, cluster)?)
}

/// Per-tree summary at horizon `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub population: u64,
    /// `h_t⁻¹ M_t`, `-∞` on extinction.
    pub m1: f64,
    /// Second largest scaled position.
    pub m2: f64,
    /// `N_t(g)` for each requested test function.
    pub laplace: Vec<f64>,
    pub a_holds: bool,
    pub b_holds: bool,
}

/// Simulates `n` trees at horizon `t` and summarizes each.
pub fn tree_records(
    model: &Model,
    runner: &Runner,
    stage: u64,
    t: f64,
    n: u64,
    tests: &[TestFunction],
    jump_theta: f64,
) -> anyhow::Result<(f64, Vec<TreeRecord>)> {
    let h = compute_h(model.lambda, &model.scale, t)?;
    let sampler = model.motion.sampler()?;
    let rho = default_rho(model.branching.beta, model.lambda);
    let records = runner.map(stage_at(stage, t), n, |_, rng| -> anyhow::Result<TreeRecord> {
        let tree = simulate_tree_with(&model.branching, &sampler, t, rng)?;
        let positions = tree.alive_positions();
        let top = top_n(&positions, 2);
        let measure = tree.extremal_measure(h);
        let (a_holds, b_holds) = tree.one_large_jump_check(h, jump_theta, rho);
        Ok(TreeRecord {
            population: positions.len() as u64,
            m1: top[0] / h,
            m2: top[1] / h,
            laplace: tests.iter().map(|g| measure.evaluate(g)).collect(),
            a_holds,
            b_holds,
        })
    })?;
    Ok((h, records))
}

// ---------------------------------------------------------------- simulate

pub fn simulate(cfg: &Config, model: &Model, runner: &Runner, replications: u64) -> anyhow::Result<Outcome> {
    let t = cfg.experiment.t;
    let h = compute_h(model.lambda, &model.scale, t)?;
    let sampler = model.motion.sampler()?;
    let trees = runner.map(stage_at(stage::SIMULATE, t), replications, |i, rng| -> anyhow::Result<_> {
        let tree = simulate_tree_with(&model.branching, &sampler, t, rng)?;
        let rightmost = tree.alive_positions().into_iter().fold(f64::NEG_INFINITY, f64::max);
        let dump = (i == 0).then(|| tree.clone());
        Ok((tree.population(), rightmost, dump))
    })?;
    let mut pops = Table::new(&["replication", "t", "population", "rightmost", "scaled_rightmost"]);
    let mut dump = Table::new(&["label", "parent", "birth", "death", "increment", "position", "alive"]);
    for (i, (z, r, tree)) in trees.iter().enumerate() {
        pops.push(vec![i.to_string(), num(t), z.to_string(), num(*r), num(r / h)]);
        if let Some(tree) = tree {
            for (k, node) in tree.nodes().iter().enumerate() {
                let parent = match node.parent {
                    bralev_core::tree::ROOT_PARENT => String::new(),
                    p => tree.label(p as usize),
                };
                dump.push(vec![
                    tree.label(k),
                    parent,
                    num(node.birth),
                    num(node.death),
                    num(node.increment),
                    num(tree.position(k)),
                    u8::from(node.is_alive()).to_string(),
                ]);
            }
        }
    }
    let mean: MeanAccumulator = trees.iter().map(|x| x.0 as f64).collect();
    let summary = format!(
        "simulated {replications} trees to t = {t}; h_t = {h}; mean population {:.4} (e^(lambda t) = {:.4})\n",
        mean.mean(),
        (model.lambda * t).exp()
    );
    Ok(Outcome {
        tables: vec![("populations.csv", pops), ("tree.csv", dump)],
        summary,
        pass: true,
    })
}

// ---------------------------------------------------------------- maxima

#[derive(Debug, Clone, PartialEq)]
pub struct MaxRow {
    pub t: f64,
    pub h: f64,
    pub replications: u64,
    pub survivors: u64,
    pub ks_max: f64,
    pub ks_second: f64,
    pub ks_se: f64,
    /// `P(h_t⁻¹ M_t ≤ 1)` on survival.
    pub p_max: Estimate,
    pub p_second: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxReport {
    pub rows: Vec<MaxRow>,
    pub target_max: f64,
    pub target_second: Estimate,
    pub trend: TrendReport,
}

pub const KS_MAX_TOLERANCE: f64 = 0.08;
pub const KS_SECOND_TOLERANCE: f64 = 0.10;

fn spot_agrees(emp: Estimate, target: Estimate) -> bool {
    (emp.value - target.value).abs() <= emp.half_width + target.half_width
}

impl MaxReport {
    pub fn last(&self) -> &MaxRow {
        self.rows.last().expect("non-empty grid")
    }

    pub fn max_spot_ok(&self) -> bool {
        spot_agrees(self.last().p_max, Estimate::exact(self.target_max))
    }

    pub fn second_spot_ok(&self) -> bool {
        spot_agrees(self.last().p_second, self.target_second)
    }

    pub fn max_ok(&self) -> bool {
        self.trend.passes() && self.max_spot_ok()
    }

    pub fn second_ok(&self) -> bool {
        self.last().ks_second < KS_SECOND_TOLERANCE && self.second_spot_ok()
    }

    pub fn outcome(&self) -> Outcome {
        let mut table = Table::new(&[
            "t",
            "h_t",
            "replications",
            "survivors",
            "ks_max",
            "ks_second",
            "ks_se",
            "p_max_le_1",
            "p_max_le_1_half_width",
            "target_max_le_1",
            "p_second_le_1",
            "p_second_le_1_half_width",
            "target_second_le_1",
        ]);
        for r in &self.rows {
            table.push(vec![
                num(r.t),
                num(r.h),
                r.replications.to_string(),
                r.survivors.to_string(),
                num(r.ks_max),
                num(r.ks_second),
                num(r.ks_se),
                num(r.p_max.value),
                num(r.p_max.half_width),
                num(self.target_max),
                num(r.p_second.value),
                num(r.p_second.half_width),
                num(self.target_second.value),
            ]);
        }
        let mut s = String::new();
        let _ = writeln!(s, "KS of the scaled maximum against the limit law:");
        s.push_str(&self.trend.table());
        let _ = writeln!(
            s,
            "trend nonincreasing: {}; final KS {:.4} (< {KS_MAX_TOLERANCE}: {})",
            self.trend.nonincreasing, self.trend.final_gap, self.trend.final_below
        );
        let last = self.last();
        let _ = writeln!(
            s,
            "P(M1 <= 1) = {:.4} ± {:.4}, limit {:.4}: {}",
            last.p_max.value,
            last.p_max.half_width,
            self.target_max,
            self.max_spot_ok()
        );
        let _ = writeln!(
            s,
            "second: KS {:.4} (< {KS_SECOND_TOLERANCE}), P(M2 <= 1) = {:.4} ± {:.4}, limit {:.4}: {}",
            last.ks_second,
            last.p_second.value,
            last.p_second.half_width,
            self.target_second.value,
            self.second_ok()
        );
        Outcome {
            tables: vec![("verify_max.csv", table)],
            summary: s,
            pass: self.max_ok() && self.second_ok(),
        }
    }
}

pub fn verify_max(cfg: &Config, model: &Model, runner: &Runner, t_grid: &[f64], n: u64) -> anyhow::Result<MaxReport> {
    let spec = limit_spec(cfg, model, runner)?;
    let f1 = |x: f64| max_law_cdf(&spec, x).expect("conditioned law available");
    let f2 = |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            second_order_cdf(&spec, x).expect("P(T = 1) available").value
        }
    };
    let mut rows = Vec::new();
    for &t in t_grid {
        let (h, records) = tree_records(model, runner, stage::MAX, t, n, &[], cfg.experiment.jump_theta)?;
        let alive: Vec<&TreeRecord> = records.iter().filter(|r| r.population > 0).collect();
        let m1: Vec<f64> = alive.iter().map(|r| r.m1).collect();
        let m2: Vec<f64> = alive.iter().map(|r| r.m2).collect();
        let survivors = alive.len() as u64;
        rows.push(MaxRow {
            t,
            h,
            replications: n,
            survivors,
            ks_max: ks_distance(&m1, f1, 0.0)?,
            ks_second: ks_distance(&m2, f2, 0.0)?,
            ks_se: ks_standard_error(m1.len()),
            p_max: proportion(m1.iter().filter(|x| **x <= 1.0).count() as u64, survivors),
            p_second: proportion(m2.iter().filter(|x| **x <= 1.0).count() as u64, survivors),
        });
    }
    let trend = convergence_report(
        &rows
            .iter()
            .map(|r| {
                (r.t, Estimate {
                    value: r.ks_max,
                    half_width: Z95 * r.ks_se,
                })
            })
            .collect::<Vec<_>>(),
        0.0,
        KS_MAX_TOLERANCE,
    )?;
    Ok(MaxReport {
        rows,
        target_max: f1(1.0),
        target_second: second_order_cdf(&spec, 1.0)?,
        trend,
    })
}

// ---------------------------------------------------------------- Laplace

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceRow {
    pub name: String,
    pub report: LaplaceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSummary {
    pub t: f64,
    pub rows: Vec<LaplaceRow>,
}

impl LaplaceSummary {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.report.overlap)
    }

    pub fn outcome(&self) -> Outcome {
        let mut table = Table::new(&[
            "t",
            "function",
            "empirical",
            "empirical_half_width",
            "limit",
            "limit_half_width",
            "overlap",
        ]);
        let mut s = String::new();
        for r in &self.rows {
            let e = r.report.empirical;
            let l = r.report.target;
            table.push(vec![
                num(self.t),
                r.name.clone(),
                num(e.value),
                num(e.half_width),
                num(l.value),
                num(l.half_width),
                r.report.overlap.to_string(),
            ]);
            let _ = writeln!(
                s,
                "{}: E exp(-N_t(g)) = {:.5} ± {:.5}, limit {:.5} ± {:.5}, overlap {}",
                r.name, e.value, e.half_width, l.value, l.half_width, r.report.overlap
            );
        }
        Outcome {
            tables: vec![("verify_laplace.csv", table)],
            summary: s,
            pass: self.pass(),
        }
    }
}

/// Limit Laplace functional: quadrature for the Yule law, nested Monte
/// Carlo otherwise.
pub fn limit_laplace(spec: &LimitSpec, g: &TestFunction, runner: &Runner) -> anyhow::Result<Estimate> {
    if spec.cluster.branching.offspring.is_yule() && matches!(spec.w, WLaw::Exponential { .. }) {
        return Ok(laplace_limit(spec, g, LaplaceMode::YuleQuadrature, &mut replication_stream(0, 0))?);
    }
    let mut rng = replication_stream(derive_seed(runner.seed(), stage::NESTED), 0);
    Ok(laplace_limit(
        spec,
        g,
        LaplaceMode::NestedMonteCarlo {
            outer: 4000,
            inner: 200,
        },
        &mut rng,
    )?)
}

pub fn verify_laplace(cfg: &Config, model: &Model, runner: &Runner, t: f64, n: u64) -> anyhow::Result<LaplaceSummary> {
    let tests = parse_tests(cfg)?;
    let gs: Vec<TestFunction> = tests.iter().map(|(_, g)| g.clone()).collect();
    let (_, records) = tree_records(model, runner, stage::LAPLACE, t, n, &gs, cfg.experiment.jump_theta)?;
    let spec = limit_spec(cfg, model, runner)?;
    let mut rows = Vec::new();
    for (j, (name, g)) in tests.iter().enumerate() {
        let values: Vec<f64> = records.iter().map(|r| r.laplace[j]).collect();
        let target = limit_laplace(&spec, g, runner)?;
        rows.push(LaplaceRow {
            name: name.clone(),
            report: laplace_compare_values(&values, target),
        });
    }
    Ok(LaplaceSummary { t, rows })
}

// ---------------------------------------------------------------- limit sampler

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub draws: u64,
    pub truncation: f64,
    pub ks: f64,
    pub tolerance: f64,
    /// `(atoms, total mass, M1, M2)` per draw.
    pub samples: Vec<(usize, u64, f64, f64)>,
}

pub const LIMIT_KS_TOLERANCE: f64 = 0.02;

impl LimitCheck {
    pub fn pass(&self) -> bool {
        self.ks < self.tolerance
    }

    pub fn outcome(&self) -> Outcome {
        let mut draws = Table::new(&["replication", "atoms", "total_mass", "m1", "m2"]);
        for (i, (atoms, mass, m1, m2)) in self.samples.iter().enumerate() {
            draws.push(vec![i.to_string(), atoms.to_string(), mass.to_string(), num(*m1), num(*m2)]);
        }
        let mut check = Table::new(&["draws", "truncation", "ks", "tolerance", "pass"]);
        check.push(vec![
            self.draws.to_string(),
            num(self.truncation),
            num(self.ks),
            num(self.tolerance),
            self.pass().to_string(),
        ]);
        Outcome {
            tables: vec![("limit.csv", draws), ("limit_check.csv", check)],
            summary: format!(
                "limit sampler: KS of M1 (censored below a = {}) vs closed form = {:.5} (< {}: {})\n",
                self.truncation,
                self.ks,
                self.tolerance,
                self.pass()
            ),
            pass: self.pass(),
        }
    }
}

/// Draws of `N_∞` under `P*`, compared with the closed-form law of the
/// maximum. A draw with no atom above the truncation is recorded at `a`,
/// which is exact for the CDF on `[a, ∞)`.
pub fn limit_check(cfg: &Config, model: &Model, runner: &Runner, draws: u64) -> anyhow::Result<LimitCheck> {
    let spec = limit_spec(cfg, model, runner)?;
    let a = cfg.experiment.truncation;
    let samples = runner.map(stage::LIMIT, draws, |_, rng| -> anyhow::Result<_> {
        let m = sample_limit_process(&spec, a, rng)?;
        let top = m.order_statistics(2);
        Ok((m.atoms().len(), m.total_mass(), top[0], top[1]))
    })?;
    let censored: Vec<f64> = samples.iter().map(|s| s.2.max(a)).collect();
    let ks = ks_distance_censored(&censored, |x| max_law_cdf(&spec, x).expect("closed form"), a)?;
    Ok(LimitCheck {
        draws,
        truncation: a,
        ks,
        tolerance: LIMIT_KS_TOLERANCE,
        samples,
    })
}

// ---------------------------------------------------------------- clusters

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub draws: u64,
    pub counts: Vec<u64>,
    pub probs: Vec<f64>,
    pub chi_square: ChiSquare,
    pub theta: f64,
    /// `ϑ = 1/λ` exactly when `p₀ = 0`; vacuous otherwise.
    pub theta_exact: bool,
}

pub const CLUSTER_BINS: usize = 50;

impl ClusterReport {
    pub fn pass(&self) -> bool {
        self.chi_square.passes() && self.theta_exact
    }

    pub fn outcome(&self) -> Outcome {
        let mut table = Table::new(&["k", "observed", "expected"]);
        for (i, (&c, &p)) in self.counts.iter().zip(&self.probs).enumerate() {
            let k = if i == CLUSTER_BINS {
                format!(">{CLUSTER_BINS}")
            } else {
                (i + 1).to_string()
            };
            table.push(vec![k, c.to_string(), num(p * self.draws as f64)]);
        }
        let summary = format!(
            "cluster sizes: {} draws, chi-square statistic {:.4} on {} bins (pooled: {}), p-value {:.4}; theta = {} (exact 1/lambda: {})\n",
            self.draws,
            self.chi_square.statistic,
            self.chi_square.bins,
            self.chi_square.pooled,
            self.chi_square.p_value,
            self.theta,
            self.theta_exact
        );
        Outcome {
            tables: vec![("verify_cluster.csv", table)],
            summary,
            pass: self.pass(),
        }
    }
}

pub fn verify_cluster(model: &Model, runner: &Runner, draws: u64) -> anyhow::Result<ClusterReport> {
    let pmf = cluster_pmf(&model.branching, CLUSTER_BINS as u64)
        .context("cluster law check needs an offspring law supported on {0, 1, 2}")?;
    let mut probs = pmf.clone();
    probs.push((1.0 - pmf.iter().sum::<f64>()).max(0.0));
    let sizes = runner.map(stage::CLUSTER, draws, |_, rng| {
        sample_cluster_size(&model.branching, ClusterMode::Auto, rng)
    })?;
    let mut counts = vec![0u64; CLUSTER_BINS + 1];
    for k in sizes {
        counts[(k as usize).min(CLUSTER_BINS + 1) - 1] += 1;
    }
    let chi_square = chi_square_gof(&counts, &probs)?;
    let theta_exact = model.branching.offspring.p(0) != 0.0 || model.theta == 1.0 / model.lambda;
    Ok(ClusterReport {
        draws,
        counts,
        probs,
        chi_square,
        theta: model.theta,
        theta_exact,
    })
}

// ---------------------------------------------------------------- front

#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub t: f64,
    pub h: f64,
    pub front: Front,
    pub sup_fast: Estimate,
    pub sup_slow: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontReport {
    pub level: f64,
    pub rows: Vec<FrontRow>,
    pub slope: f64,
    pub speed: f64,
    pub fast: TrendReport,
    pub slow: TrendReport,
}

pub const SLOPE_TOLERANCE: f64 = 0.2;
pub const BAND_TOLERANCE: f64 = 0.1;
pub const BAND_MULTIPLIERS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

impl FrontReport {
    pub fn slope_ok(&self) -> bool {
        (self.slope - self.speed).abs() <= SLOPE_TOLERANCE * self.speed
    }

    pub fn band_ok(&self) -> bool {
        self.fast.passes() && self.slow.passes()
    }

    pub fn outcome(&self) -> Outcome {
        let mut front = Table::new(&["t", "theta", "front_x", "ci_lo", "ci_hi", "log_front"]);
        let mut band = Table::new(&[
            "t",
            "sup_one_minus_u_fast",
            "fast_half_width",
            "sup_u_slow",
            "slow_half_width",
        ]);
        for r in &self.rows {
            front.push(vec![
                num(r.t),
                num(self.level),
                num(r.front.x),
                num(r.front.lo),
                num(r.front.hi),
                num(r.front.x.abs().ln()),
            ]);
            band.push(vec![
                num(r.t),
                num(r.sup_fast.value),
                num(r.sup_fast.half_width),
                num(r.sup_slow.value),
                num(r.sup_slow.half_width),
            ]);
        }
        let mut s = format!(
            "front slope of log|x| on t: {:.4}, lambda/alpha = {:.4}, within {}%: {}\n",
            self.slope,
            self.speed,
            SLOPE_TOLERANCE * 100.0,
            self.slope_ok()
        );
        s.push_str("sup (1-u) beyond the fast band:\n");
        s.push_str(&self.fast.table());
        s.push_str("sup |u - P(extinction)| inside the slow band:\n");
        s.push_str(&self.slow.table());
        let _ = writeln!(s, "band check: {}", self.band_ok());
        Outcome {
            tables: vec![("front.csv", front), ("band.csv", band)],
            summary: s,
            pass: self.slope_ok() && self.band_ok(),
        }
    }
}

pub fn front(cfg: &Config, model: &Model, runner: &Runner, t_grid: &[f64], n: u64) -> anyhow::Result<FrontReport> {
    let ex = &cfg.experiment;
    let g = KppWeight::ramp(0.0, 1.0, 1.0)?;
    let sampler = model.motion.sampler()?;
    let mut rows = Vec::new();
    for &t in t_grid {
        let h = compute_h(model.lambda, &model.scale, t)?;
        let trees = runner.map(stage_at(stage::FRONT, t), n, |_, rng| {
            simulate_tree_with(&model.branching, &sampler, t, rng).map(|tr| tr.alive_positions())
        })?;
        let batch = TreeBatch::new(t, trees);
        let front = front_position(&batch, &g, ex.front_level, (-h * 1e3, -h * 1e-3))
            .with_context(|| format!("front search at t = {t}"))?;
        let (sup_fast, mut sup_slow) = band_sups(&batch, &g, ex.gamma_fast, ex.gamma_slow, &BAND_MULTIPLIERS);
        sup_slow.value = (sup_slow.value - model.extinction).abs();
        rows.push(FrontRow {
            t,
            h,
            front,
            sup_fast,
            sup_slow,
        });
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.front.x.abs().ln()).collect();
    let fast = convergence_report(&rows.iter().map(|r| (r.t, r.sup_fast)).collect::<Vec<_>>(), 0.0, BAND_TOLERANCE)?;
    let slow = convergence_report(&rows.iter().map(|r| (r.t, r.sup_slow)).collect::<Vec<_>>(), 0.0, BAND_TOLERANCE)?;
    Ok(FrontReport {
        level: ex.front_level,
        slope: regression_slope(&ts, &logs),
        speed: model.lambda / model.scale.alpha,
        rows,
        fast,
        slow,
    })
}

// ---------------------------------------------------------------- diagnostics

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRow {
    pub t: f64,
    pub replications: u64,
    /// `P(A_t(θ)^c)`.
    pub a_fail: Estimate,
    /// `P(B_t(ϱ)^c)`.
    pub b_fail: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOne {
    pub t: f64,
    pub s: f64,
    pub mean: Estimate,
    /// `e^{λt} e^{-βs}`.
    pub stated: f64,
    /// `e^{λ(t-s)} e^{-βs}`: a particle alive at `t - s` outliving `s`.
    pub direct: f64,
}

impl ManyToOne {
    pub fn within(&self, target: f64) -> bool {
        (self.mean.value - target).abs() < 4.0 * self.mean.standard_error()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub draws: u64,
    pub quantile: f64,
    pub x: f64,
    pub ratio: f64,
}

pub const TAIL_BAND: (f64, f64) = (0.85, 1.15);
pub const JUMP_TOLERANCE: f64 = 0.05;

impl TailCheck {
    pub fn pass(&self) -> bool {
        self.ratio >= TAIL_BAND.0 && self.ratio <= TAIL_BAND.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub jumps: Vec<JumpRow>,
    pub jump_trend: TrendReport,
    pub many_to_one: ManyToOne,
    pub tail: Option<TailCheck>,
}

impl Diagnostics {
    pub fn pass(&self) -> bool {
        self.jump_trend.passes()
            && self.many_to_one.within(self.many_to_one.stated)
            && self.tail.as_ref().is_none_or(TailCheck::pass)
    }

    pub fn outcome(&self) -> Outcome {
        let mut jumps = Table::new(&[
            "t",
            "replications",
            "p_a_fail",
            "p_a_fail_half_width",
            "p_b_fail",
            "p_b_fail_half_width",
        ]);
        for r in &self.jumps {
            jumps.push(vec![
                num(r.t),
                r.replications.to_string(),
                num(r.a_fail.value),
                num(r.a_fail.half_width),
                num(r.b_fail.value),
                num(r.b_fail.half_width),
            ]);
        }
        let m = &self.many_to_one;
        let mut mto = Table::new(&["t", "s", "mean", "half_width", "stated_target", "direct_target"]);
        mto.push(vec![
            num(m.t),
            num(m.s),
            num(m.mean.value),
            num(m.mean.half_width),
            num(m.stated),
            num(m.direct),
        ]);
        let mut tables = vec![("diagnostics.csv", jumps), ("many_to_one.csv", mto)];
        let mut s = String::from("P(A_t^c), more than one large jump on some lineage:\n");
        s.push_str(&self.jump_trend.table());
        let _ = writeln!(
            s,
            "nonincreasing: {}; final {:.4} (< {JUMP_TOLERANCE}: {})",
            self.jump_trend.nonincreasing, self.jump_trend.final_gap, self.jump_trend.final_below
        );
        let _ = writeln!(
            s,
            "alive leaves born before t - s at (t, s) = ({}, {}): {:.5} ± {:.5}; e^(lambda t - beta s) = {:.5} (within 4 SE: {}); e^(lambda(t-s) - beta s) = {:.5} (within 4 SE: {})",
            m.t,
            m.s,
            m.mean.value,
            m.mean.half_width,
            m.stated,
            m.within(m.stated),
            m.direct,
            m.within(m.direct)
        );
        if let Some(tail) = &self.tail {
            let mut tt = Table::new(&["draws", "quantile", "x", "ratio"]);
            tt.push(vec![tail.draws.to_string(), num(tail.quantile), num(tail.x), num(tail.ratio)]);
            tables.push(("tail.csv", tt));
            let _ = writeln!(
                s,
                "tail: x^alpha P(|xi_1| > x) alpha/(q1+q2) = {:.4} at x = {:.3} (band {:?}: {})",
                tail.ratio,
                tail.x,
                TAIL_BAND,
                tail.pass()
            );
        }
        Outcome {
            tables,
            summary: s,
            pass: self.pass(),
        }
    }
}

pub fn jump_rows(cfg: &Config, model: &Model, runner: &Runner, t_grid: &[f64], n: u64) -> anyhow::Result<(Vec<JumpRow>, TrendReport)> {
    let mut rows = Vec::new();
    for &t in t_grid {
        let (_, records) = tree_records(model, runner, stage::JUMPS, t, n, &[], cfg.experiment.jump_theta)?;
        let alive: Vec<&TreeRecord> = records.iter().filter(|r| r.population > 0).collect();
        let k = alive.len() as u64;
        rows.push(JumpRow {
            t,
            replications: n,
            a_fail: proportion(alive.iter().filter(|r| !r.a_holds).count() as u64, k),
            b_fail: proportion(alive.iter().filter(|r| !r.b_holds).count() as u64, k),
        });
    }
    let trend = convergence_report(&rows.iter().map(|r| (r.t, r.a_fail)).collect::<Vec<_>>(), 0.0, JUMP_TOLERANCE)?;
    Ok((rows, trend))
}

pub fn many_to_one(model: &Model, runner: &Runner, t: f64, s: f64, n: u64) -> anyhow::Result<ManyToOne> {
    let sampler = model.motion.sampler()?;
    let counts = runner.map(stage_at(stage::MANY_TO_ONE, t), n, |_, rng| {
        simulate_tree_with(&model.branching, &sampler, t, rng).map(|tr| tr.alive_born_before(s) as f64)
    })?;
    let acc: MeanAccumulator = counts.into_iter().collect();
    let beta = model.branching.beta;
    Ok(ManyToOne {
        t,
        s,
        mean: acc.estimate(),
        stated: (model.lambda * t - beta * s).exp(),
        direct: (model.lambda * (t - s) - beta * s).exp(),
    })
}

const TAIL_CHUNK: u64 = 100_000;

/// `x^α P̂(|ξ₁| > x) α/(q₁+q₂)` at the empirical `(1 - quantile)` point.
pub fn tail_check(model: &Model, runner: &Runner, draws: u64, quantile: f64) -> anyhow::Result<TailCheck> {
    let sampler = model.motion.sampler()?;
    let chunks = draws.div_ceil(TAIL_CHUNK);
    let parts = runner.map(stage::TAIL, chunks, |i, rng| -> anyhow::Result<Vec<f64>> {
        let len = TAIL_CHUNK.min(draws - i * TAIL_CHUNK);
        Ok((0..len).map(|_| sampler.sample(1.0, rng).abs()).collect())
    })?;
    let mut all: Vec<f64> = parts.into_iter().flatten().collect();
    let k = ((draws as f64) * quantile).round() as usize;
    anyhow::ensure!(k >= 1 && k < all.len(), "tail quantile leaves no exceedances");
    // the (k+1)-th largest leaves exactly k samples above it
    let (_, x, _) = all.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let x = *x;
    let above = k as f64 / draws as f64;
    let alpha = model.scale.alpha;
    Ok(TailCheck {
        draws,
        quantile,
        x,
        ratio: x.powf(alpha) * above * alpha / (model.scale.q1 + model.scale.q2),
    })
}

pub fn diagnostics(cfg: &Config, model: &Model, runner: &Runner, n: u64) -> anyhow::Result<Diagnostics> {
    let (jumps, jump_trend) = jump_rows(cfg, model, runner, &cfg.experiment.jump_t_grid, n)?;
    let many = many_to_one(model, runner, 2.0, 1.0, 100_000)?;
    let tail = match model.motion {
        bralev_core::MotionSpec::StrictlyStable { .. } => {
            Some(tail_check(model, runner, cfg.experiment.tail_draws, 1e-4)?)
        }
        _ => None,
    };
    Ok(Diagnostics {
        jumps,
        jump_trend,
        many_to_one: many,
        tail,
    })
}
