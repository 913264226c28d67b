//! Continuous extension of a symmetric function from `Ω^{≤J}` to zero-padded
//! inputs, for domains bounded away from zero.
//!
//! With `a(x) = ∏ min(1, x_i/lo_i)` and `b(x) = ∏ max(0, (lo_i − x_i)/lo_i)`,
//!
//! ```text
//! V̄(x_1..x_J) = Σ_{S ⊇ {j : x_j ∈ Ω}} ∏_{j∈S} a(x_j) ∏_{j∉S} b(x_j) V({max(x_j, lo)}_{j∈S})
//! ```
//!
//! Zero points have `a = 0, b = 1`, so padding drops out and
//! `V̄(X, 0, …, 0) = V(X)` exactly for `X ⊂ Ω`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of slots the subset expansion accepts.
pub const MAX_EXTENSION_SLOTS: usize = 20;

/// Points within this distance below `lo` count as members of `Ω`.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Which hypothesis makes zero padding harmless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `min Ω > 0`: padding is handled by the extension.
    A,
    /// The function ignores appended zero points.
    B,
}

/// The box `Ω = [lo, hi]` in `[0, ∞)^I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    condition: Condition,
}

impl DomainSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, condition: Condition) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::invalid("domain dimension must be positive"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if lo.iter().zip(&hi).any(|(l, h)| *l < 0.0 || l > h) {
            return Err(Error::invalid("domain needs 0 <= lo <= hi componentwise"));
        }
        if condition == Condition::A && lo.iter().any(|&l| l <= 0.0) {
            return Err(Error::invalid("condition A needs lo > 0 componentwise"));
        }
        Ok(DomainSpec { lo, hi, condition })
    }

    /// `[lo, hi]^dim` with the same bounds in every coordinate.
    pub fn cube(dim: usize, lo: f64, hi: f64, condition: Condition) -> Result<Self> {
        DomainSpec::new(vec![lo; dim], vec![hi; dim], condition)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    /// Membership in `Ω` for a point already known to be in `[0, hi]`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lo).all(|(v, l)| *v >= l - MEMBERSHIP_TOL)
    }

    /// Componentwise `max(x, lo)`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.lo).map(|(v, l)| v.max(*l)).collect()
    }

    /// Reject points outside `[0, hi]`; values within `tol·(1 + hi)` above
    /// `hi` are pulled back onto the boundary.
    pub fn check_padded(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        x.iter()
            .zip(&self.hi)
            .map(|(&v, &h)| {
                if !v.is_finite() {
                    Err(Error::NonFinite)
                } else if v < 0.0 || v > h + tol * (1.0 + h) {
                    Err(Error::invalid(format!("coordinate {v} outside [0, {h}]")))
                } else {
                    Ok(v.min(h))
                }
            })
            .collect()
    }

    /// Uniform draw from `Ω`.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
            .collect()
    }
}

/// A permutation-invariant function of a finite point set.
pub trait SymmetricFunction: Send + Sync {
    fn eval(&self, points: &[Vec<f64>]) -> f64;
}

impl<F> SymmetricFunction for F
where
    F: Fn(&[Vec<f64>]) -> f64 + Send + Sync,
{
    fn eval(&self, points: &[Vec<f64>]) -> f64 {
        self(points)
    }
}

/// `(a(x), b(x))` for the domain minimum `lo`.
pub fn extension_weights(x: &[f64], lo: &[f64]) -> Result<(f64, f64)> {
    if x.len() != lo.len() {
        return Err(Error::DimensionMismatch {
            expected: lo.len(),
            found: x.len(),
        });
    }
    if lo.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return Err(Error::invalid("extension weights need lo > 0"));
    }
    let mut a = 1.0;
    let mut b = 1.0;
    for (&v, &l) in x.iter().zip(lo) {
        a *= (v / l).min(1.0);
        b *= (1.0 - v / l).max(0.0);
    }
    Ok((a, b))
}

/// One slot of a weighted subset expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotWeight {
    /// Weight when the slot is included.
    pub include: f64,
    /// Weight when the slot is left out.
    pub exclude: f64,
    /// The slot lies in `Ω` and must be included.
    pub forced: bool,
}

impl SlotWeight {
    pub fn for_point(domain: &DomainSpec, x: &[f64]) -> Result<Self> {
        let (a, b) = extension_weights(x, domain.lo())?;
        let forced = domain.contains(x);
        Ok(if forced {
            SlotWeight {
                include: 1.0,
                exclude: 0.0,
                forced,
            }
        } else {
            SlotWeight {
                include: a,
                exclude: b,
                forced,
            }
        })
    }
}

/// `Σ_S ∏_{j∈S} include_j ∏_{j∉S} exclude_j · f(S)` over subsets `S` that
/// contain every forced slot. Subsets with zero weight are skipped, so `f`
/// only sees subsets that contribute.
pub fn weighted_subset_sum<F>(weights: &[SlotWeight], mut f: F) -> Result<f64>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    if weights.len() > MAX_EXTENSION_SLOTS {
        return Err(Error::invalid(format!(
            "{} slots exceed the extension limit of {MAX_EXTENSION_SLOTS}",
            weights.len()
        )));
    }
    let mut fixed = Vec::new();
    let mut free = Vec::new();
    for (j, w) in weights.iter().enumerate() {
        if w.forced || w.exclude == 0.0 {
            fixed.push(j);
        } else if w.include != 0.0 {
            free.push(j);
        }
    }
    let base: f64 = fixed.iter().map(|&j| weights[j].include).product();
    let mut total = 0.0;
    let mut chosen = Vec::with_capacity(weights.len());
    for mask in 0u32..(1u32 << free.len()) {
        chosen.clear();
        chosen.extend_from_slice(&fixed);
        let mut w = base;
        for (bit, &j) in free.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                chosen.push(j);
                w *= weights[j].include;
            } else {
                w *= weights[j].exclude;
            }
        }
        chosen.sort_unstable();
        total += w * f(&chosen)?;
    }
    Ok(total)
}

/// The extension `V̄` of a symmetric function on a condition-A domain.
pub struct Extension<V> {
    v: V,
    domain: DomainSpec,
    slots: usize,
    empty_value: f64,
}

impl<V: std::fmt::Debug> std::fmt::Debug for Extension<V> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extension")
            .field("v", &self.v)
            .field("domain", &self.domain)
            .field("slots", &self.slots)
            .field("empty_value", &self.empty_value)
            .finish()
    }
}

/// Extend `v` to `slots` points in `[0, hi]`.
pub fn extend<V: SymmetricFunction>(v: V, domain: DomainSpec, slots: usize) -> Result<Extension<V>> {
    if domain.condition() != Condition::A {
        return Err(Error::invalid("the extension needs a condition-A domain"));
    }
    if slots == 0 || slots > MAX_EXTENSION_SLOTS {
        return Err(Error::invalid(format!(
            "J = {slots} must be in 1..={MAX_EXTENSION_SLOTS}"
        )));
    }
    Ok(Extension {
        v,
        domain,
        slots,
        empty_value: 0.0,
    })
}

impl<V: SymmetricFunction> Extension<V> {
    /// Value used for the empty subset, which only arises when no point lies
    /// in `Ω`. Defaults to zero.
    pub fn with_empty_value(mut self, value: f64) -> Self {
        self.empty_value = value;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn inner(&self) -> &V {
        &self.v
    }

    /// `V̄` at up to `J` points; missing slots are zero.
    pub fn eval(&self, points: &[Vec<f64>]) -> Result<f64> {
        if points.len() > self.slots {
            return Err(Error::invalid(format!(
                "{} points exceed J = {}",
                points.len(),
                self.slots
            )));
        }
        let checked = points
            .iter()
            .map(|x| self.domain.check_padded(x, 0.0))
            .collect::<Result<Vec<_>>>()?;
        self.eval_checked(&checked)
    }

    /// Like [`eval`](Self::eval) but tolerates values up to `tol·(1 + hi)`
    /// above `hi`, as produced by reconstruction.
    pub fn eval_reconstructed(&self, points: &[Vec<f64>], tol: f64) -> Result<f64> {
        let checked = points
            .iter()
            .map(|x| self.domain.check_padded(x, tol))
            .collect::<Result<Vec<_>>>()?;
        self.eval_checked(&checked)
    }

    fn eval_checked(&self, points: &[Vec<f64>]) -> Result<f64> {
        let weights = points
            .iter()
            .map(|x| SlotWeight::for_point(&self.domain, x))
            .collect::<Result<Vec<_>>>()?;
        let mut args = Vec::with_capacity(points.len());
        weighted_subset_sum(&weights, |chosen| {
            if chosen.is_empty() {
                return Ok(self.empty_value);
            }
            args.clear();
            args.extend(chosen.iter().map(|&j| self.domain.lift(&points[j])));
            Ok(self.v.eval(&args))
        })
    }
}
