//! Exact aggregators built from reconstruction: `ψ = V̄ ∘ Λ`.
//!
//! * [`build_psi`]: `ψ(Σ_k η(x_k)) = V(X)` for every `|X| ≤ J`.
//! * [`build_psi_conditional`]: `ψ(x_j, Σ_{k≠j} η(x_k), y) = V(x_j, X∖{x_j}, y)`.
//! * [`build_nested_psi`]: products grouped by firm, with rival firms summarized
//!   through `η ∘ flatten ∘ Λ` of their portfolio moments.
//! * [`aggregative_decompose`]: any symmetric game as a generalized aggregative
//!   game with shares `h(a) = η((a, x⁰))`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, NestedLevel, Result};
use crate::extension::{
    extend, weighted_subset_sum, Condition, DomainSpec, Extension, SlotWeight, SymmetricFunction,
    MAX_EXTENSION_SLOTS,
};
use crate::moment_core::{eta, nested_pool, pool, pool_excluding, MomentBasis, MomentVector, PointSet};
use crate::reconstruct::{reconstruct, strip_zeros, ReconstructConfig, SortedPaddedMatrix};

/// Number of sampled inputs used to spot-check caller assertions.
pub const SPOT_CHECKS: usize = 50;
const SPOT_TOL: f64 = 1e-9;
/// Reconstructed coordinates up to this (relative) size are padding.
const ZERO_TOL: f64 = 1e-9;
/// Reconstructed coordinates may overshoot `hi` by this (relative) amount.
const BOUND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    Plain,
    Conditional,
    Nested,
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= SPOT_TOL * (1.0 + a.abs().max(b.abs()))
}

fn check_basis(m: &MomentVector, expected: &MomentBasis) -> Result<()> {
    let b = m.basis();
    if b.dim() != expected.dim() {
        return Err(Error::DimensionMismatch {
            expected: expected.dim(),
            found: b.dim(),
        });
    }
    if b.degree() != expected.degree() {
        return Err(Error::invalid(format!(
            "moment degree {} does not match J = {}",
            b.degree(),
            expected.degree()
        )));
    }
    Ok(())
}

fn zero_tol(matrix: &SortedPaddedMatrix) -> f64 {
    let scale = matrix
        .columns()
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    ZERO_TOL * (1.0 + scale)
}

fn sample_points(rng: &mut ChaCha8Rng, domain: &DomainSpec, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| domain.sample(rng)).collect()
}

fn sample_exogenous(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()
}

fn spot_check_failed(what: &str) -> Error {
    Error::invalid(format!("spot check failed: function is not {what}"))
}

/// The plain aggregator of a symmetric function.
pub struct Psi<V> {
    inner: PlainInner<V>,
    domain: DomainSpec,
    basis: Arc<MomentBasis>,
    config: ReconstructConfig,
}

enum PlainInner<V> {
    Direct(V),
    Extended(Extension<V>),
}

/// `ψ` with `ψ(pool(X)) = V(X)` for point sets in `Ω` of size at most `J`.
///
/// Under condition A, `V` is only evaluated on nonempty subsets of `Ω`.
/// Under condition B it must accept the empty set and ignore appended zero
/// points; both that and permutation invariance are spot-checked.
pub fn build_psi<V: SymmetricFunction>(
    v: V,
    domain: DomainSpec,
    slots: usize,
    config: ReconstructConfig,
) -> Result<Psi<V>> {
    let basis = Arc::new(MomentBasis::new(domain.dim(), slots)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..SPOT_CHECKS {
        let n = rng.gen_range(1..=slots);
        let mut x = sample_points(&mut rng, &domain, n);
        let base = v.eval(&x);
        x.shuffle(&mut rng);
        if !agree(base, v.eval(&x)) {
            return Err(spot_check_failed("permutation invariant"));
        }
        if domain.condition() == Condition::B && n < slots {
            x.push(vec![0.0; domain.dim()]);
            if !agree(base, v.eval(&x)) {
                return Err(spot_check_failed("invariant to appended zeros"));
            }
        }
    }
    let inner = match domain.condition() {
        Condition::A => PlainInner::Extended(extend(v, domain.clone(), slots)?),
        Condition::B => PlainInner::Direct(v),
    };
    Ok(Psi {
        inner,
        domain,
        basis,
        config,
    })
}

impl<V: SymmetricFunction> Psi<V> {
    pub fn mode(&self) -> PsiMode {
        PsiMode::Plain
    }

    pub fn basis(&self) -> &Arc<MomentBasis> {
        &self.basis
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Value for the empty set under condition A (zero moments). Defaults
    /// to zero.
    pub fn with_empty_value(mut self, value: f64) -> Self {
        if let PlainInner::Extended(e) = self.inner {
            self.inner = PlainInner::Extended(e.with_empty_value(value));
        }
        self
    }

    pub fn eval(&self, m: &MomentVector) -> Result<f64> {
        check_basis(m, &self.basis)?;
        let report = reconstruct(m, &self.config)?;
        match &self.inner {
            PlainInner::Direct(v) => {
                let points = strip_zeros(&report.matrix, zero_tol(&report.matrix));
                Ok(v.eval(points.points()))
            }
            PlainInner::Extended(e) => e.eval_reconstructed(report.matrix.columns(), BOUND_TOL),
        }
    }

    /// `ψ(pool(X))`.
    pub fn eval_points(&self, x: &PointSet) -> Result<f64> {
        self.eval(&pool(x, &self.basis)?)
    }
}

/// A function of an own point, a symmetric block of competitor points, and
/// exogenous variables.
pub trait ConditionalFunction: Send + Sync {
    fn eval(&self, own: &[f64], competitors: &[Vec<f64>], y: &[f64]) -> f64;
}

impl<F> ConditionalFunction for F
where
    F: Fn(&[f64], &[Vec<f64>], &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, own: &[f64], competitors: &[Vec<f64>], y: &[f64]) -> f64 {
        self(own, competitors, y)
    }
}

/// `ψ(x_j, Σ_{k≠j} η_{I,J−1}(x_k), y)`.
pub struct ConditionalPsi<V> {
    v: V,
    domain: DomainSpec,
    basis: Arc<MomentBasis>,
    exogenous_dim: usize,
    config: ReconstructConfig,
}

/// Build the conditional aggregator for markets of at most `slots ≥ 2`
/// points. Competitor moments have degree `slots − 1`.
pub fn build_psi_conditional<V: ConditionalFunction>(
    v: V,
    domain: DomainSpec,
    slots: usize,
    exogenous_dim: usize,
    config: ReconstructConfig,
) -> Result<ConditionalPsi<V>> {
    if slots < 2 {
        return Err(Error::invalid("a conditional aggregator needs J >= 2"));
    }
    if domain.condition() == Condition::A && slots - 1 > MAX_EXTENSION_SLOTS {
        return Err(Error::invalid("too many competitor slots for the extension"));
    }
    let basis = Arc::new(MomentBasis::new(domain.dim(), slots - 1)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..SPOT_CHECKS {
        let own = domain.sample(&mut rng);
        let n = rng.gen_range(0..slots);
        let mut comps = sample_points(&mut rng, &domain, n);
        let y = sample_exogenous(&mut rng, exogenous_dim);
        let base = v.eval(&own, &comps, &y);
        comps.shuffle(&mut rng);
        if !agree(base, v.eval(&own, &comps, &y)) {
            return Err(spot_check_failed("permutation invariant in competitors"));
        }
        if domain.condition() == Condition::B && n + 1 < slots {
            comps.push(vec![0.0; domain.dim()]);
            if !agree(base, v.eval(&own, &comps, &y)) {
                return Err(spot_check_failed("invariant to appended zero competitors"));
            }
        }
    }
    Ok(ConditionalPsi {
        v,
        domain,
        basis,
        exogenous_dim,
        config,
    })
}

impl<V: ConditionalFunction> ConditionalPsi<V> {
    pub fn mode(&self) -> PsiMode {
        PsiMode::Conditional
    }

    /// Competitor moment basis `(I, J − 1)`.
    pub fn basis(&self) -> &Arc<MomentBasis> {
        &self.basis
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn exogenous_dim(&self) -> usize {
        self.exogenous_dim
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn inner(&self) -> &V {
        &self.v
    }

    pub fn eval(&self, own: &[f64], competitors: &MomentVector, y: &[f64]) -> Result<f64> {
        if own.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                found: own.len(),
            });
        }
        if y.len() != self.exogenous_dim {
            return Err(Error::DimensionMismatch {
                expected: self.exogenous_dim,
                found: y.len(),
            });
        }
        check_basis(competitors, &self.basis)?;
        let report = reconstruct(competitors, &self.config)?;
        match self.domain.condition() {
            Condition::B => {
                let comps = strip_zeros(&report.matrix, zero_tol(&report.matrix));
                Ok(self.v.eval(own, comps.points(), y))
            }
            Condition::A => {
                let points = report
                    .matrix
                    .columns()
                    .iter()
                    .map(|x| self.domain.check_padded(x, BOUND_TOL))
                    .collect::<Result<Vec<_>>>()?;
                let weights = points
                    .iter()
                    .map(|x| SlotWeight::for_point(&self.domain, x))
                    .collect::<Result<Vec<_>>>()?;
                let mut args = Vec::with_capacity(points.len());
                weighted_subset_sum(&weights, |chosen| {
                    args.clear();
                    args.extend(chosen.iter().map(|&k| self.domain.lift(&points[k])));
                    Ok(self.v.eval(own, &args, y))
                })
            }
        }
    }

    /// `ψ(x_j, pool_excluding(X, j), y)`.
    pub fn eval_points(&self, x: &PointSet, j: usize, y: &[f64]) -> Result<f64> {
        let own = x
            .points()
            .get(j)
            .ok_or(Error::IndexOutOfRange {
                index: j,
                len: x.len(),
            })?
            .clone();
        self.eval(&own, &pool_excluding(x, j, &self.basis)?, y)
    }
}

/// A function of the focal firm's portfolio, the rival firms' portfolios,
/// and exogenous variables; symmetric within every portfolio and across
/// rival firms.
pub trait NestedFunction: Send + Sync {
    fn eval(&self, own: &[Vec<f64>], rivals: &[Vec<Vec<f64>>], y: &[f64]) -> f64;
}

impl<F> NestedFunction for F
where
    F: Fn(&[Vec<f64>], &[Vec<Vec<f64>>], &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, own: &[Vec<f64>], rivals: &[Vec<Vec<f64>>], y: &[f64]) -> f64 {
        self(own, rivals, y)
    }
}

/// Two-level aggregator for up to `F` firms with up to `J` products each.
pub struct NestedPsi<V> {
    v: V,
    domain: DomainSpec,
    inner: Arc<MomentBasis>,
    outer: Arc<MomentBasis>,
    exogenous_dim: usize,
    config: ReconstructConfig,
}

pub fn build_nested_psi<V: NestedFunction>(
    v: V,
    domain: DomainSpec,
    products: usize,
    firms: usize,
    exogenous_dim: usize,
    config: ReconstructConfig,
) -> Result<NestedPsi<V>> {
    if firms < 2 {
        return Err(Error::invalid("a nested aggregator needs F >= 2"));
    }
    if domain.condition() == Condition::A && products * firms > MAX_EXTENSION_SLOTS {
        return Err(Error::invalid(format!(
            "J·F = {} exceeds the extension limit of {MAX_EXTENSION_SLOTS}",
            products * firms
        )));
    }
    let dim = domain.dim();
    let inner = Arc::new(MomentBasis::new(dim, products)?);
    let outer = Arc::new(MomentBasis::new(dim * products, firms - 1)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..SPOT_CHECKS {
        let own_n = rng.gen_range(1..=products);
        let mut own = sample_points(&mut rng, &domain, own_n);
        let rival_n = rng.gen_range(0..firms);
        let mut rivals: Vec<Vec<Vec<f64>>> = (0..rival_n)
            .map(|_| {
                let n = rng.gen_range(1..=products);
                sample_points(&mut rng, &domain, n)
            })
            .collect();
        let y = sample_exogenous(&mut rng, exogenous_dim);
        let base = v.eval(&own, &rivals, &y);
        own.shuffle(&mut rng);
        rivals.shuffle(&mut rng);
        for r in &mut rivals {
            r.shuffle(&mut rng);
        }
        if !agree(base, v.eval(&own, &rivals, &y)) {
            return Err(spot_check_failed("permutation invariant within and across firms"));
        }
        if domain.condition() == Condition::B && own_n < products {
            own.push(vec![0.0; dim]);
            if !agree(base, v.eval(&own, &rivals, &y)) {
                return Err(spot_check_failed("invariant to appended zero products"));
            }
        }
    }
    Ok(NestedPsi {
        v,
        domain,
        inner,
        outer,
        exogenous_dim,
        config,
    })
}

fn nested(level: NestedLevel) -> impl Fn(Error) -> Error {
    move |e| Error::Nested {
        level,
        source: Box::new(e),
    }
}

impl<V: NestedFunction> NestedPsi<V> {
    pub fn mode(&self) -> PsiMode {
        PsiMode::Nested
    }

    /// Portfolio basis `(I, J)`.
    pub fn inner_basis(&self) -> &Arc<MomentBasis> {
        &self.inner
    }

    /// Rival-firm basis `(I·J, F − 1)`.
    pub fn outer_basis(&self) -> &Arc<MomentBasis> {
        &self.outer
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn eval(&self, own: &MomentVector, rivals: &MomentVector, y: &[f64]) -> Result<f64> {
        if y.len() != self.exogenous_dim {
            return Err(Error::DimensionMismatch {
                expected: self.exogenous_dim,
                found: y.len(),
            });
        }
        check_basis(own, &self.inner)?;
        check_basis(rivals, &self.outer)?;
        let dim = self.domain.dim();
        let own_matrix = reconstruct(own, &self.config)
            .map_err(nested(NestedLevel::Inner))?
            .matrix;
        let outer_matrix = reconstruct(rivals, &self.config)
            .map_err(nested(NestedLevel::Outer))?
            .matrix;
        let tol = zero_tol(&outer_matrix);
        let rival_matrices = outer_matrix
            .columns()
            .iter()
            .filter(|col| col.iter().any(|&v| v > tol))
            .map(|col| SortedPaddedMatrix::unflatten(dim, col))
            .collect::<Result<Vec<_>>>()
            .map_err(nested(NestedLevel::Outer))?;

        match self.domain.condition() {
            Condition::B => {
                let own_points = strip_zeros(&own_matrix, zero_tol(&own_matrix));
                let rivals: Vec<Vec<Vec<f64>>> = rival_matrices
                    .iter()
                    .map(|m| strip_zeros(m, tol).into_points())
                    .filter(|p| !p.is_empty())
                    .collect();
                Ok(self.v.eval(own_points.points(), &rivals, y))
            }
            Condition::A => {
                // Slots: own products first, then each rival's products.
                let mut points = Vec::new();
                let mut owner = Vec::new();
                for x in own_matrix.columns() {
                    points.push(self.domain.check_padded(x, BOUND_TOL)?);
                    owner.push(0usize);
                }
                for (f, m) in rival_matrices.iter().enumerate() {
                    for x in m.columns() {
                        points.push(self.domain.check_padded(x, BOUND_TOL)?);
                        owner.push(f + 1);
                    }
                }
                let weights = points
                    .iter()
                    .map(|x| SlotWeight::for_point(&self.domain, x))
                    .collect::<Result<Vec<_>>>()?;
                weighted_subset_sum(&weights, |chosen| {
                    let mut own_pts = Vec::new();
                    let mut rivals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); rival_matrices.len()];
                    for &k in chosen {
                        let x = self.domain.lift(&points[k]);
                        match owner[k] {
                            0 => own_pts.push(x),
                            f => rivals[f - 1].push(x),
                        }
                    }
                    rivals.retain(|r| !r.is_empty());
                    Ok(self.v.eval(&own_pts, &rivals, y))
                })
            }
        }
    }

    /// `ψ` at the nested moments of `portfolios` for firm `focal`.
    pub fn eval_portfolios(&self, portfolios: &[PointSet], focal: usize, y: &[f64]) -> Result<f64> {
        let (own, rivals) = nested_pool(portfolios, focal, &self.inner, &self.outer, &self.config)?;
        self.eval(&own, &rivals, y)
    }
}

/// A payoff of an own action and the rivals' `(action, type)` pairs.
pub trait RivalPayoff: Send + Sync {
    fn eval(&self, own_action: &[f64], rivals: &[(Vec<f64>, Vec<f64>)]) -> f64;
}

impl<F> RivalPayoff for F
where
    F: Fn(&[f64], &[(Vec<f64>, Vec<f64>)]) -> f64 + Send + Sync,
{
    fn eval(&self, own_action: &[f64], rivals: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        self(own_action, rivals)
    }
}

/// Adapter that splits joint competitor points into `(action, type)`.
struct SplitRivals<G> {
    payoff: G,
    action_dim: usize,
}

impl<G: RivalPayoff> ConditionalFunction for SplitRivals<G> {
    fn eval(&self, own: &[f64], competitors: &[Vec<f64>], _y: &[f64]) -> f64 {
        let rivals: Vec<(Vec<f64>, Vec<f64>)> = competitors
            .iter()
            .map(|z| (z[..self.action_dim].to_vec(), z[self.action_dim..].to_vec()))
            .collect();
        self.payoff.eval(&own[..self.action_dim], &rivals)
    }
}

/// A game in generalized aggregative form: `g_j(a) = g̃_j(a_j, Σ_{j'≠j} h(a_{j'}, x⁰_{j'}))`
/// with `h(a, x⁰) = η_{I_a+I_x0, J−1}((a, x⁰))`.
pub struct AggregativeForm<G> {
    psi: ConditionalPsi<SplitRivals<G>>,
    action_dim: usize,
    type_dim: usize,
    players: usize,
}

/// Decompose a payoff that is symmetric over rival `(action, type)` pairs.
///
/// `domain` is the box of joint `(action, type)` points; its dimension is
/// `action_dim + type_dim`.
pub fn aggregative_decompose<G: RivalPayoff>(
    payoff: G,
    domain: DomainSpec,
    action_dim: usize,
    type_dim: usize,
    players: usize,
    config: ReconstructConfig,
) -> Result<AggregativeForm<G>> {
    if action_dim == 0 {
        return Err(Error::invalid("action dimension must be positive"));
    }
    if domain.dim() != action_dim + type_dim {
        return Err(Error::DimensionMismatch {
            expected: action_dim + type_dim,
            found: domain.dim(),
        });
    }
    let adapter = SplitRivals {
        payoff,
        action_dim,
    };
    let psi = build_psi_conditional(adapter, domain, players, 0, config)?;
    Ok(AggregativeForm {
        psi,
        action_dim,
        type_dim,
        players,
    })
}

impl<G: RivalPayoff> AggregativeForm<G> {
    /// Aggregate dimension `K = κ(I_a + I_x0, J − 1)`.
    pub fn k(&self) -> usize {
        self.psi.basis().len()
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn basis(&self) -> &Arc<MomentBasis> {
        self.psi.basis()
    }

    /// The original payoff `g_j(a_j, rivals)`.
    pub fn direct(&self, own_action: &[f64], rivals: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        self.psi.inner().payoff.eval(own_action, rivals)
    }

    /// `h(a, x⁰) = η((a, x⁰))`.
    pub fn share(&self, action: &[f64], player_type: &[f64]) -> Result<MomentVector> {
        if action.len() != self.action_dim || player_type.len() != self.type_dim {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim + self.type_dim,
                found: action.len() + player_type.len(),
            });
        }
        let z: Vec<f64> = action.iter().chain(player_type).copied().collect();
        eta(&z, self.psi.basis())
    }

    /// `Σ_{j'≠j} h(a_{j'}, x⁰_{j'})`.
    pub fn aggregate(&self, profile: &[(Vec<f64>, Vec<f64>)], j: usize) -> Result<MomentVector> {
        if j >= profile.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: profile.len(),
            });
        }
        if profile.len() > self.players {
            return Err(Error::invalid(format!(
                "{} players exceed J = {}",
                profile.len(),
                self.players
            )));
        }
        let mut total = MomentVector::zeros(Arc::clone(self.psi.basis()));
        for (k, (a, t)) in profile.iter().enumerate() {
            if k != j {
                total = total.checked_add(&self.share(a, t)?)?;
            }
        }
        Ok(total)
    }

    /// `g̃(a_j, m)`.
    pub fn reduced_payoff(&self, own_action: &[f64], aggregate: &MomentVector) -> Result<f64> {
        if own_action.len() != self.action_dim {
            return Err(Error::DimensionMismatch {
                expected: self.action_dim,
                found: own_action.len(),
            });
        }
        // The conditional aggregator expects a joint point; the type block is ignored.
        let padded: Vec<f64> = own_action
            .iter()
            .copied()
            .chain(std::iter::repeat_n(0.0, self.type_dim))
            .collect();
        self.psi.eval(&padded, aggregate, &[])
    }

    /// `g̃(a_j, Σ_{j'≠j} h)` evaluated at a full profile.
    pub fn payoff_via_aggregate(&self, profile: &[(Vec<f64>, Vec<f64>)], j: usize) -> Result<f64> {
        let m = self.aggregate(profile, j)?;
        self.reduced_payoff(&profile[j].0, &m)
    }
}

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Symmetric test functions exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinFunction {
    /// `ln(1 + Σ_k v_k) + γ` with `v_k = ∏_i x_{k,i}`.
    LogitCs,
    /// `Σ_{k<l} x_k · x_l`.
    PairwiseProduct,
    /// Industry Cournot profit `Σ_k q_k (1 − Σ_l q_l)` with `q_k = x_{k,1}`.
    Cournot,
}

impl BuiltinFunction {
    pub const ALL: [BuiltinFunction; 3] = [
        BuiltinFunction::LogitCs,
        BuiltinFunction::PairwiseProduct,
        BuiltinFunction::Cournot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinFunction::LogitCs => "logit_cs",
            BuiltinFunction::PairwiseProduct => "pairwise_product",
            BuiltinFunction::Cournot => "cournot",
        }
    }

    pub fn eval(self, points: &[Vec<f64>]) -> f64 {
        match self {
            BuiltinFunction::LogitCs => {
                let s: f64 = points.iter().map(|x| x.iter().product::<f64>()).sum();
                (1.0 + s).ln() + EULER_GAMMA
            }
            BuiltinFunction::PairwiseProduct => {
                let mut total = 0.0;
                for (k, x) in points.iter().enumerate() {
                    for z in &points[k + 1..] {
                        total += x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                total
            }
            BuiltinFunction::Cournot => {
                let q: f64 = points.iter().map(|x| x[0]).sum();
                q * (1.0 - q)
            }
        }
    }
}

impl std::str::FromStr for BuiltinFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown function {s:?}; expected one of logit_cs, pairwise_product, cournot"
                ))
            })
    }
}

impl SymmetricFunction for BuiltinFunction {
    fn eval(&self, points: &[Vec<f64>]) -> f64 {
        BuiltinFunction::eval(*self, points)
    }
}
