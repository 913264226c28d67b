//! Desk-scale dynamic oligopoly with symmetric firms.
//!
//! Firms have integer quality states `1..=S`, earn logit-demand profits, and
//! decide each period whether to invest. Equilibria are computed by damped
//! smoothed best-response iteration, either on full states
//! `(own, sorted competitor states)` ([`solve_mpe`]) or on moment states
//! `(own, Σ_k c_k^q for q ≤ K)` ([`solve_mme`]).
//!
//! Both solvers share one engine over *state classes*: every class carries
//! the competitor multisets it stands for, and a class's Bellman backup is
//! the uniform average over them. For the MPE each class holds exactly one
//! multiset.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
pub use crate::represent::EULER_GAMMA;

/// Largest `S · C(S+J−2, J−1)` the solvers will enumerate.
pub const MAX_STATES: usize = 1_000_000;
/// Damping applied to policy updates.
pub const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(rename = "J")]
    pub firms: usize,
    #[serde(rename = "S")]
    pub states: u32,
    pub price_scale: f64,
    pub quality_slope: f64,
    pub invest_cost: f64,
    pub success_prob: f64,
    pub depreciation_prob: f64,
    pub discount: f64,
    pub choice_scale: f64,
}

impl Default for GameSpec {
    fn default() -> Self {
        GameSpec {
            firms: 2,
            states: 3,
            price_scale: 1.0,
            quality_slope: 0.5,
            invest_cost: 0.2,
            success_prob: 0.7,
            depreciation_prob: 0.2,
            discount: 0.9,
            choice_scale: 5.0,
        }
    }
}

impl GameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.firms == 0 || self.states == 0 {
            return Err(Error::invalid("J and S must be at least 1"));
        }
        let reals = [
            self.price_scale,
            self.quality_slope,
            self.invest_cost,
            self.success_prob,
            self.depreciation_prob,
            self.discount,
            self.choice_scale,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (name, p) in [
            ("success_prob", self.success_prob),
            ("depreciation_prob", self.depreciation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::invalid(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if self.choice_scale <= 0.0 {
            return Err(Error::invalid("choice_scale must be positive"));
        }
        if self.invest_cost < 0.0 {
            return Err(Error::invalid("invest_cost must be nonnegative"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: GameSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    fn quality(&self, x: u32) -> f64 {
        (self.quality_slope * x as f64).exp()
    }

    /// `price_scale · v / (1 + v + Σ v_k)` with `v = exp(slope · x)`.
    pub fn profit(&self, own: u32, competitors: &[u32]) -> f64 {
        let v = self.quality(own);
        let rivals: f64 = competitors.iter().map(|&c| self.quality(c)).sum();
        self.price_scale * v / (1.0 + v + rivals)
    }

    /// `(down, stay, up)` probabilities at state `x` for investment
    /// probability `sigma`, with moves off the grid folded into `stay`.
    pub fn transition(&self, x: u32, sigma: f64) -> [f64; 3] {
        let up = sigma * self.success_prob * (1.0 - self.depreciation_prob);
        let down = self.depreciation_prob * (1.0 - sigma * self.success_prob);
        let up = if x < self.states { up } else { 0.0 };
        let down = if x > 1 { down } else { 0.0 };
        [down, 1.0 - up - down, up]
    }

    /// Number of sorted competitor multisets, `C(S+J−2, J−1)`.
    pub fn competitor_multisets(&self) -> Result<usize> {
        let n = self.states as usize + self.firms - 2;
        binomial(n, self.firms - 1)
    }

    /// Full state count `S · C(S+J−2, J−1)`.
    pub fn full_state_count(&self) -> Result<usize> {
        self.competitor_multisets()?
            .checked_mul(self.states as usize)
            .ok_or_else(|| Error::Overflow("state count".into()))
    }
}

fn binomial(n: usize, k: usize) -> Result<usize> {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| Error::Overflow("binomial coefficient".into()))?
            / (i + 1);
    }
    Ok(acc)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sorted (ascending) multisets of `len` states from `1..=s`.
fn multisets(s: u32, len: usize) -> Vec<Vec<u32>> {
    fn rec(s: u32, len: usize, lo: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in lo..=s {
            cur.push(v);
            rec(s, len, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(s, len, 1, &mut Vec::with_capacity(len), &mut out);
    out
}

/// `(Σ c, Σ c², …, Σ c^K)`.
pub fn moment_key(competitors: &[u32], k: usize) -> Result<Vec<u64>> {
    (1..=k as u32)
        .map(|q| {
            competitors.iter().try_fold(0u64, |acc, &c| {
                (c as u64)
                    .checked_pow(q)
                    .and_then(|p| acc.checked_add(p))
                    .ok_or_else(|| Error::Overflow("integer moment".into()))
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumKind {
    Mpe,
    Mme {
        #[serde(rename = "K")]
        k: usize,
    },
}

/// A state: own quality and either the sorted competitor states (MPE) or
/// their integer moments (MME).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub own: u32,
    pub key: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub kind: EquilibriumKind,
    pub states: Vec<StateKey>,
    pub values: Vec<f64>,
    pub policies: Vec<f64>,
    pub iterations: usize,
    /// Final sup-norm value change.
    pub residual: f64,
    pub residual_trace: Vec<f64>,
    /// Number of distinct competitor keys.
    pub competitor_states: usize,
}

impl EquilibriumSolution {
    fn key_of(&self, competitors: &[u32]) -> Result<Vec<u64>> {
        let mut sorted = competitors.to_vec();
        sorted.sort_unstable();
        match self.kind {
            EquilibriumKind::Mpe => Ok(sorted.into_iter().map(u64::from).collect()),
            EquilibriumKind::Mme { k } => moment_key(&sorted, k),
        }
    }

    fn index(&self, own: u32, competitors: &[u32]) -> Result<usize> {
        let key = StateKey {
            own,
            key: self.key_of(competitors)?,
        };
        self.states
            .iter()
            .position(|s| *s == key)
            .ok_or_else(|| Error::invalid(format!("state {own} with competitors {competitors:?} is not on the grid")))
    }

    /// Value at own state `own` facing `competitors` (any order).
    pub fn value(&self, own: u32, competitors: &[u32]) -> Result<f64> {
        Ok(self.values[self.index(own, competitors)?])
    }

    /// Investment probability at `(own, competitors)`.
    pub fn policy(&self, own: u32, competitors: &[u32]) -> Result<f64> {
        Ok(self.policies[self.index(own, competitors)?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting investment probability at every state.
    pub initial_policy: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 20_000,
            initial_policy: 0.5,
            execution: Execution::default(),
        }
    }
}

/// One competitor multiset of a class, with everything needed for a backup
/// that does not depend on the current iterate.
struct Preimage {
    competitors: Vec<u32>,
    profit: f64,
    /// Class seen by each competitor (own firm becomes one of its rivals).
    rival_class: Vec<usize>,
    /// Next-period competitor key per joint move code, indexed by own next state.
    next_class: Vec<Vec<usize>>,
}

struct Class {
    own: u32,
    preimages: Vec<Preimage>,
}

struct Model {
    spec: GameSpec,
    kind: EquilibriumKind,
    keys: Vec<StateKey>,
    classes: Vec<Class>,
    competitor_states: usize,
}

impl Model {
    fn build(spec: &GameSpec, kind: EquilibriumKind) -> Result<Model> {
        spec.validate()?;
        let total = spec.full_state_count()?;
        if total > MAX_STATES {
            return Err(Error::invalid(format!(
                "{total} states exceed the enumeration limit of {MAX_STATES}"
            )));
        }
        let s = spec.states;
        let rivals = spec.firms - 1;
        let sets = multisets(s, rivals);
        let key_of = |c: &[u32]| -> Result<Vec<u64>> {
            match kind {
                EquilibriumKind::Mpe => Ok(c.iter().map(|&v| u64::from(v)).collect()),
                EquilibriumKind::Mme { k } => moment_key(c, k),
            }
        };
        // Competitor keys in order of first appearance; sets grouped by key.
        let mut key_index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut comp_keys: Vec<Vec<u64>> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut set_key = Vec::with_capacity(sets.len());
        for (i, c) in sets.iter().enumerate() {
            let key = key_of(c)?;
            let idx = *key_index.entry(key.clone()).or_insert_with(|| {
                comp_keys.push(key);
                groups.push(Vec::new());
                comp_keys.len() - 1
            });
            groups[idx].push(i);
            set_key.push(idx);
        }
        let set_index: HashMap<&[u32], usize> =
            sets.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
        let n_keys = comp_keys.len();
        let class_of = |own: u32, set: usize| (own as usize - 1) * n_keys + set_key[set];
        let lookup = |c: &mut Vec<u32>| -> usize {
            c.sort_unstable();
            set_index[c.as_slice()]
        };

        let moves = 3usize.pow(rivals as u32);
        let mut keys = Vec::with_capacity(s as usize * n_keys);
        let mut classes = Vec::with_capacity(s as usize * n_keys);
        for own in 1..=s {
            for (g, members) in groups.iter().enumerate() {
                keys.push(StateKey {
                    own,
                    key: comp_keys[g].clone(),
                });
                let mut preimages = Vec::with_capacity(members.len());
                for &m in members {
                    let c = &sets[m];
                    let rival_class = (0..rivals)
                        .map(|k| {
                            let mut view: Vec<u32> = c
                                .iter()
                                .enumerate()
                                .filter(|&(i, _)| i != k)
                                .map(|(_, &v)| v)
                                .collect();
                            view.push(own);
                            class_of(c[k], lookup(&mut view))
                        })
                        .collect();
                    let next_class = (1..=s)
                        .map(|own_next| {
                            (0..moves)
                                .map(|code| {
                                    let mut next = step_all(c, code, s);
                                    class_of(own_next, lookup(&mut next))
                                })
                                .collect()
                        })
                        .collect();
                    preimages.push(Preimage {
                        competitors: c.clone(),
                        profit: spec.profit(own, c),
                        rival_class,
                        next_class,
                    });
                }
                classes.push(Class { own, preimages });
            }
        }
        Ok(Model {
            spec: spec.clone(),
            kind,
            keys,
            classes,
            competitor_states: n_keys,
        })
    }

    /// `(Q(not invest), Q(invest))` for one class.
    fn q_values(&self, class: &Class, values: &[f64], policies: &[f64]) -> (f64, f64) {
        let spec = &self.spec;
        let beta = spec.discount;
        let mut q = [0.0f64; 2];
        for pre in &class.preimages {
            let rival_moves: Vec<[f64; 3]> = pre
                .competitors
                .iter()
                .zip(&pre.rival_class)
                .map(|(&c, &cls)| spec.transition(c, policies[cls]))
                .collect();
            // Probability of each joint competitor move, in code order.
            let joint: Vec<f64> = (0..pre.next_class[0].len())
                .map(|code| {
                    let mut p = 1.0;
                    let mut rest = code;
                    for m in &rival_moves {
                        p *= m[rest % 3];
                        rest /= 3;
                    }
                    p
                })
                .collect();
            for (a, qa) in q.iter_mut().enumerate() {
                let own_move = spec.transition(class.own, a as f64);
                let mut cont = 0.0;
                for (d, &po) in own_move.iter().enumerate() {
                    if po == 0.0 {
                        continue;
                    }
                    let own_next = (class.own as i64 + d as i64 - 1) as usize;
                    let row = &pre.next_class[own_next - 1];
                    let ev: f64 = joint.iter().zip(row).map(|(p, &cls)| p * values[cls]).sum();
                    cont += po * ev;
                }
                *qa += pre.profit - spec.invest_cost * a as f64 + beta * cont;
            }
        }
        let n = class.preimages.len() as f64;
        (q[0] / n, q[1] / n)
    }

    fn solve(&self, opts: &SolverOptions) -> Result<EquilibriumSolution> {
        if !(opts.tol > 0.0 && opts.tol.is_finite()) {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(0.0..=1.0).contains(&opts.initial_policy) {
            return Err(Error::invalid("initial policy must lie in [0, 1]"));
        }
        let n = self.classes.len();
        let lambda = self.spec.choice_scale;
        let mut values = vec![0.0; n];
        let mut policies = vec![opts.initial_policy; n];
        let mut trace = Vec::new();
        for iter in 1..=opts.max_iter {
            let updates = par::map_range(opts.execution, n, |i| {
                let (q0, q1) = self.q_values(&self.classes[i], &values, &policies);
                let br = logistic(lambda * (q1 - q0));
                let sigma = (1.0 - DAMPING) * policies[i] + DAMPING * br;
                (sigma * q1 + (1.0 - sigma) * q0, sigma)
            });
            let mut dv = 0.0f64;
            let mut dp = 0.0f64;
            for (i, (v, p)) in updates.into_iter().enumerate() {
                dv = dv.max((v - values[i]).abs());
                dp = dp.max((p - policies[i]).abs());
                values[i] = v;
                policies[i] = p;
            }
            if !dv.is_finite() {
                return Err(Error::NotConverged {
                    iterations: iter,
                    residual_trace: trace,
                });
            }
            trace.push(dv);
            if dv <= opts.tol && dp <= opts.tol {
                return Ok(EquilibriumSolution {
                    kind: self.kind,
                    states: self.keys.clone(),
                    values,
                    policies,
                    iterations: iter,
                    residual: dv,
                    residual_trace: trace,
                    competitor_states: self.competitor_states,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: opts.max_iter,
            residual_trace: trace,
        })
    }
}

/// Apply joint move `code` (base-3 digits: down, stay, up) to `c`.
fn step_all(c: &[u32], code: usize, s: u32) -> Vec<u32> {
    let mut rest = code;
    c.iter()
        .map(|&x| {
            let d = rest % 3;
            rest /= 3;
            match d {
                0 => x.saturating_sub(1).max(1),
                2 => (x + 1).min(s),
                _ => x,
            }
        })
        .collect()
}

pub fn solve_mpe(spec: &GameSpec, tol: f64, max_iter: usize) -> Result<EquilibriumSolution> {
    solve_mpe_with(
        spec,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_mpe_with(spec: &GameSpec, opts: &SolverOptions) -> Result<EquilibriumSolution> {
    Model::build(spec, EquilibriumKind::Mpe)?.solve(opts)
}

/// Moment-based equilibrium with competitors summarized by degree-`k` power
/// sums. Moment states with several pre-images average profit and
/// transitions uniformly over them.
pub fn solve_mme(spec: &GameSpec, k: usize, tol: f64, max_iter: usize) -> Result<EquilibriumSolution> {
    solve_mme_with(
        spec,
        k,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_mme_with(spec: &GameSpec, k: usize, opts: &SolverOptions) -> Result<EquilibriumSolution> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Model::build(spec, EquilibriumKind::Mme { k })?.solve(opts)
}

/// Number of distinct competitor moment tuples of degree `k`.
pub fn moment_state_count(spec: &GameSpec, k: usize) -> Result<usize> {
    spec.validate()?;
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let mut seen = std::collections::HashSet::new();
    for c in multisets(spec.states, spec.firms - 1) {
        seen.insert(moment_key(&c, k)?);
    }
    Ok(seen.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    #[serde(rename = "K")]
    pub k: usize,
    pub value_gap: f64,
    pub policy_gap: f64,
    pub mpe_states: usize,
    pub mme_states: usize,
    pub mpe_competitor_states: usize,
    pub mme_competitor_states: usize,
    /// `mpe_states / mme_states`.
    pub reduction_factor: f64,
    pub mpe_iterations: usize,
    pub mme_iterations: usize,
}

/// Sup-norm gaps between the MPE and the degree-`k` MME over every full state.
pub fn compare_solutions(mpe: &EquilibriumSolution, mme: &EquilibriumSolution) -> Result<Comparison> {
    let k = match mme.kind {
        EquilibriumKind::Mme { k } => k,
        EquilibriumKind::Mpe => return Err(Error::invalid("second solution must be an MME")),
    };
    if mpe.kind != EquilibriumKind::Mpe {
        return Err(Error::invalid("first solution must be an MPE"));
    }
    let index: HashMap<&StateKey, usize> = mme.states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut value_gap = 0.0f64;
    let mut policy_gap = 0.0f64;
    for (i, s) in mpe.states.iter().enumerate() {
        let comps: Vec<u32> = s.key.iter().map(|&c| c as u32).collect();
        let key = StateKey {
            own: s.own,
            key: moment_key(&comps, k)?,
        };
        let j = *index
            .get(&key)
            .ok_or_else(|| Error::invalid("solutions come from different games"))?;
        value_gap = value_gap.max((mpe.values[i] - mme.values[j]).abs());
        policy_gap = policy_gap.max((mpe.policies[i] - mme.policies[j]).abs());
    }
    Ok(Comparison {
        k,
        value_gap,
        policy_gap,
        mpe_states: mpe.states.len(),
        mme_states: mme.states.len(),
        mpe_competitor_states: mpe.competitor_states,
        mme_competitor_states: mme.competitor_states,
        reduction_factor: mpe.states.len() as f64 / mme.states.len() as f64,
        mpe_iterations: mpe.iterations,
        mme_iterations: mme.iterations,
    })
}

pub fn compare_mme_mpe(spec: &GameSpec, k: usize, opts: &SolverOptions) -> Result<Comparison> {
    let mpe = solve_mpe_with(spec, opts)?;
    let mme = solve_mme_with(spec, k, opts)?;
    compare_solutions(&mpe, &mme)
}

/// `(1/α)·(ln(1 + Σ v_k) + γ)`.
pub fn logit_consumer_surplus(v: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::invalid(format!("logit values must be positive, got {bad}")));
    }
    Ok(((1.0 + v.iter().sum::<f64>()).ln() + EULER_GAMMA) / alpha)
}

/// `(p − mc) · exp(δ − p) / (1 + Σ_k exp(δ_k − p_k))` over all products.
pub fn logit_profit(price: f64, cost: f64, quality: f64, rivals: &[(f64, f64)]) -> Result<f64> {
    let all = std::iter::once((price, quality)).chain(rivals.iter().copied());
    for (p, d) in all.clone() {
        if !(p.is_finite() && d.is_finite() && p > 0.0 && d > 0.0) {
            return Err(Error::invalid(format!(
                "prices and qualities must be positive, got ({p}, {d})"
            )));
        }
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite);
    }
    let denom = 1.0 + all.map(|(p, d)| (d - p).exp()).sum::<f64>();
    Ok((price - cost) * (quality - price).exp() / denom)
}
