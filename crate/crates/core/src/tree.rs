//! Full branching Lévy genealogy up to a horizon `t`.
//!
//! Nodes live in an arena in breadth-first order, so every parent precedes
//! its children and the children of one node are contiguous. Each node
//! carries one motion increment `X_{u,t}` over its lifetime clipped to
//! `[0, t]`; given the genealogy these increments are independent with the
//! law of `ξ_{τ_{u,t}}`, so no trajectory is discretized.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;

use crate::branching::BranchingConfig;
use crate::error::{invalid, Error, Result};
use crate::measure::PointMeasure;
use crate::motion::{IncrementSampler, MotionSpec};
use crate::rng::exponential;

/// Parent index of the root.
pub const ROOT_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub parent: u32,
    /// Position among its siblings, starting at 1 (Ulam–Harris digit).
    pub rank: u32,
    pub birth: f64,
    /// Death time, or `f64::INFINITY` when the particle is alive at `t`.
    pub death: f64,
    /// `X_{u,t}`.
    pub increment: f64,
    /// Number of ancestors excluding the root, `n_t^u`.
    pub generation: u32,
    pub first_child: u32,
    pub children: u32,
}

impl Node {
    pub fn is_alive(&self) -> bool {
        self.death.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleTree {
    nodes: Vec<Node>,
    /// `ξ` at `min(σ_u, t)`, accumulated along the ancestor chain.
    positions: Vec<f64>,
    horizon: f64,
}

/// Simulates the genealogy and motion increments up to `t`.
pub fn simulate_tree<R: Rng + ?Sized>(
    cfg: &BranchingConfig,
    motion: &MotionSpec,
    t: f64,
    rng: &mut R,
) -> Result<ParticleTree> {
    simulate_tree_with(cfg, &motion.sampler()?, t, rng)
}

/// [`simulate_tree`] with a precompiled sampler.
///
/// The node cap is `cfg.population_cap`, applied to the total number of
/// nodes (which bounds the live count).
pub fn simulate_tree_with<R: Rng + ?Sized>(
    cfg: &BranchingConfig,
    sampler: &IncrementSampler,
    t: f64,
    rng: &mut R,
) -> Result<ParticleTree> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", "must be non-negative and finite"));
    }
    let mut nodes: Vec<Node> = Vec::with_capacity(64);
    let mut positions: Vec<f64> = Vec::with_capacity(64);
    nodes.push(Node {
        parent: ROOT_PARENT,
        rank: 0,
        birth: 0.0,
        death: 0.0,
        increment: 0.0,
        generation: 0,
        first_child: 0,
        children: 0,
    });
    let mut i = 0;
    while i < nodes.len() {
        let birth = nodes[i].birth;
        let death = birth + exponential(rng, cfg.beta);
        let span = if death > t { t - birth } else { death - birth };
        let increment = if span > 0.0 { sampler.sample(span, rng) } else { 0.0 };
        let parent_position = match nodes[i].parent {
            ROOT_PARENT => 0.0,
            p => positions[p as usize],
        };
        positions.push(parent_position + increment);
        let first_child = nodes.len() as u32;
        let node = &mut nodes[i];
        node.increment = increment;
        if death > t {
            node.death = f64::INFINITY;
        } else {
            node.death = death;
            let k = cfg.offspring.sample(rng) as u32;
            let generation = node.generation + 1;
            node.first_child = first_child;
            node.children = k;
            if nodes.len() as u64 + k as u64 > cfg.population_cap {
                return Err(Error::PopulationExplosion {
                    cap: cfg.population_cap,
                    time: death,
                });
            }
            for rank in 1..=k {
                nodes.push(Node {
                    parent: i as u32,
                    rank,
                    birth: death,
                    death: 0.0,
                    increment: 0.0,
                    generation,
                    first_child: 0,
                    children: 0,
                });
            }
        }
        i += 1;
    }
    Ok(ParticleTree {
        nodes,
        positions,
        horizon: t,
    })
}

impl ParticleTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Z_t`.
    pub fn population(&self) -> u64 {
        self.nodes.iter().filter(|n| n.is_alive()).count() as u64
    }

    /// Indices of `L_t`.
    pub fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_alive())
            .map(|(i, _)| i)
    }

    /// `ξ_t^v` for `v ∈ L_t`, in arena order.
    pub fn alive_positions(&self) -> Vec<f64> {
        self.alive().map(|i| self.positions[i]).collect()
    }

    /// Position of node `i` at `min(σ_i, t)`.
    pub fn position(&self, i: usize) -> f64 {
        self.positions[i]
    }

    /// Position recomputed by summing `X_{u,t}` over the ancestor chain.
    pub fn chain_sum(&self, i: usize) -> f64 {
        let mut total = 0.0;
        let mut cur = i as u32;
        while cur != ROOT_PARENT {
            let n = &self.nodes[cur as usize];
            total += n.increment;
            cur = n.parent;
        }
        total
    }

    /// Ulam–Harris label: `o` for the root, otherwise dot-joined ranks.
    pub fn label(&self, i: usize) -> String {
        let mut digits = Vec::new();
        let mut cur = i as u32;
        while cur != ROOT_PARENT && self.nodes[cur as usize].parent != ROOT_PARENT {
            digits.push(self.nodes[cur as usize].rank);
            cur = self.nodes[cur as usize].parent;
        }
        if digits.is_empty() {
            return String::from("o");
        }
        let mut s = String::new();
        for (k, d) in digits.iter().rev().enumerate() {
            if k > 0 {
                s.push('.');
            }
            let _ = write!(s, "{d}");
        }
        s
    }

    /// Position at `t` of the line of descent that always follows the first
    /// child; `None` if that line dies out.
    pub fn first_line_position(&self) -> Option<f64> {
        let mut cur = 0usize;
        loop {
            let n = &self.nodes[cur];
            if n.is_alive() {
                return Some(self.positions[cur]);
            }
            if n.children == 0 {
                return None;
            }
            cur = n.first_child as usize;
        }
    }

    /// Number of alive descendants at `t` of every node (itself included).
    fn alive_below(&self) -> Vec<u64> {
        let mut count: Vec<u64> = self.nodes.iter().map(|n| n.is_alive() as u64).collect();
        for i in (1..self.nodes.len()).rev() {
            let p = self.nodes[i].parent as usize;
            count[p] += count[i];
        }
        count
    }

    /// `N_t = Σ_{v ∈ L_t} δ_{ξ_t^v / h}`.
    pub fn extremal_measure(&self, h: f64) -> PointMeasure {
        let mut m = PointMeasure::with_capacity(self.nodes.len() / 2 + 1);
        for i in self.alive() {
            m.push_scaled(self.positions[i], h, 1);
        }
        m
    }

    /// `Ñ_t = Σ_{v ∈ L_t} Σ_{u ∈ I_v} δ_{X_{u,t} / h}`. An ancestor shared by
    /// several alive leaves appears once with multiplicity equal to that
    /// number.
    pub fn ancestral_measure(&self, h: f64) -> PointMeasure {
        self.cut_measure_born_after(h, f64::NEG_INFINITY)
    }

    /// `Ñ_{s,t}`: [`ParticleTree::ancestral_measure`] restricted to
    /// ancestors born after `t - s`.
    pub fn cut_measure(&self, h: f64, s: f64) -> PointMeasure {
        self.cut_measure_born_after(h, self.horizon - s)
    }

    fn cut_measure_born_after(&self, h: f64, cutoff: f64) -> PointMeasure {
        let below = self.alive_below();
        let mut m = PointMeasure::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if below[i] > 0 && n.birth > cutoff {
                m.push_scaled(n.increment, h, below[i]);
            }
        }
        m
    }

    /// `(A_t(θ), B_t(ϱ))`: whether every alive lineage has at most one
    /// increment with `|X_{u,t}| > hθ/t`, and whether every alive lineage
    /// has `n_t^v ≤ ϱt`.
    pub fn one_large_jump_check(&self, h: f64, theta: f64, rho: f64) -> (bool, bool) {
        let t = self.horizon;
        let threshold = h * theta / t;
        let mut big: Vec<u8> = Vec::with_capacity(self.nodes.len());
        let mut a_holds = true;
        let mut b_holds = true;
        for n in &self.nodes {
            let own = (n.increment.abs() > threshold) as u8;
            let inherited = match n.parent {
                ROOT_PARENT => 0,
                p => big[p as usize],
            };
            let count = inherited.saturating_add(own).min(2);
            big.push(count);
            if n.is_alive() {
                if count >= 2 {
                    a_holds = false;
                }
                if n.generation as f64 > rho * t {
                    b_holds = false;
                }
            }
        }
        (a_holds, b_holds)
    }

    /// `Σ_{v ∈ L_t} 1{b_v ≤ t - s}`.
    pub fn alive_born_before(&self, s: f64) -> u64 {
        let cutoff = self.horizon - s;
        self.nodes
            .iter()
            .filter(|n| n.is_alive() && n.birth <= cutoff)
            .count() as u64
    }
}

/// `(A, B)` for a tree; see [`ParticleTree::one_large_jump_check`].
pub fn one_large_jump_check(tree: &ParticleTree, h: f64, theta: f64, rho: f64) -> (bool, bool) {
    tree.one_large_jump_check(h, theta, rho)
}

/// `max(β + 2, ϱ*)` where `ϱ*` is just beyond the root of
/// `ϱ(log ϱ - log β) - ϱ + β = λ` on `ϱ > β`.
pub fn default_rho(beta: f64, lambda: f64) -> f64 {
    let rate = |rho: f64| rho * (libm::log(rho) - libm::log(beta)) - rho + beta;
    let mut lo = beta;
    let mut hi = 2.0 * beta + 1.0;
    while rate(hi) <= lambda {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > lambda {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (beta + 2.0).max(hi * (1.0 + 1e-9))
}
