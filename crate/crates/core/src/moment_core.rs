//! Monomial basis enumeration, the feature map `η`, and sum pooling.
//!
//! Basis order is canonical: ascending total degree, ties broken by
//! descending lexicographic order on the exponent tuple. Because the order
//! within each degree does not depend on the maximum degree, the basis of
//! degree `J - 1` is always a prefix of the basis of degree `J`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::reconstruct::{self, ReconstructConfig};

/// Bases larger than this are refused rather than allocated.
pub const MAX_BASIS_LEN: usize = 1 << 24;

/// Exponent tuple `s` identifying the monomial `x₁^{s₁}⋯x_I^{s_I}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `q! / (s₁!⋯s_I!)` for `q = |s|`.
    pub fn multinomial(&self) -> f64 {
        let mut acc: u128 = 1;
        let mut n: u128 = 0;
        for &s in &self.0 {
            for k in 1..=s as u128 {
                n += 1;
                // acc * n / k stays integral: acc is a product of binomials.
                acc = acc * n / k;
            }
        }
        acc as f64
    }

    /// Monomial value at `x`; `0⁰ = 1`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&s, &xi)| xi.powi(s as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Number of monomials with `1 ≤ |s| ≤ degree` in `dim` variables:
/// `C(degree + dim, dim) − 1`.
pub fn kappa(dim: usize, degree: usize) -> Result<usize> {
    if dim == 0 || degree == 0 {
        return Err(Error::invalid("kappa requires I >= 1 and J >= 1"));
    }
    let n = degree
        .checked_add(dim)
        .ok_or_else(|| Error::Overflow(format!("kappa({dim}, {degree})")))?;
    let c = binomial(n, dim).ok_or_else(|| Error::Overflow(format!("kappa({dim}, {degree})")))?;
    usize::try_from(c - 1).map_err(|_| Error::Overflow(format!("kappa({dim}, {degree})")))
}

/// All exponent tuples of total degree exactly `degree` in `dim` variables,
/// in descending lexicographic order.
fn compositions(dim: usize, degree: u32, out: &mut Vec<MultiIndex>) {
    fn rec(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=left).rev() {
            prefix.push(first);
            rec(prefix, left - first, slots - 1, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), degree, dim, out);
}

/// Ordered monomial basis of `η_{I,J}`.
#[derive(Debug, Clone)]
pub struct MomentBasis {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    /// `degree_start[d]` is the first position of degree `d`; length `degree + 2`.
    degree_start: Vec<usize>,
    position: HashMap<MultiIndex, usize>,
}

impl PartialEq for MomentBasis {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.degree == other.degree
    }
}

impl Eq for MomentBasis {}

/// Canonical basis of all monomials with `1 ≤ |s| ≤ degree`.
pub fn exponent_basis(dim: usize, degree: usize) -> Result<MomentBasis> {
    MomentBasis::new(dim, degree)
}

impl MomentBasis {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        let len = kappa(dim, degree)?;
        if len > MAX_BASIS_LEN {
            return Err(Error::invalid(format!(
                "basis ({dim}, {degree}) has {len} monomials, above the limit {MAX_BASIS_LEN}"
            )));
        }
        let mut indices = Vec::with_capacity(len);
        let mut degree_start = vec![0, 0];
        for d in 1..=degree as u32 {
            compositions(dim, d, &mut indices);
            degree_start.push(indices.len());
        }
        debug_assert_eq!(indices.len(), len);
        let position = indices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(MomentBasis {
            dim,
            degree,
            indices,
            degree_start,
            position,
        })
    }

    /// Input dimension `I`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximum total degree `J`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, exponents: &[u32]) -> Option<usize> {
        // Avoid allocating for the common miss-free path.
        self.position.get(&MultiIndex(exponents.to_vec())).copied()
    }

    /// Positions of all indices with total degree exactly `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        if d == 0 || d > self.degree {
            return 0..0;
        }
        self.degree_start[d]..self.degree_start[d + 1]
    }

    /// Evaluate `η(x)` into `out` (length `len()`).
    fn eta_into(&self, x: &[f64], out: &mut [f64]) {
        // powers[i * (J+1) + k] = x_i^k
        let stride = self.degree + 1;
        let mut powers = vec![1.0; self.dim * stride];
        for (i, &xi) in x.iter().enumerate() {
            for k in 1..stride {
                powers[i * stride + k] = powers[i * stride + k - 1] * xi;
            }
        }
        for (slot, s) in out.iter_mut().zip(&self.indices) {
            let mut v = 1.0;
            for (i, &e) in s.0.iter().enumerate() {
                if e > 0 {
                    v *= powers[i * stride + e as usize];
                }
            }
            *slot = v;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    #[serde(rename = "I")]
    dim: usize,
    #[serde(rename = "J")]
    degree: usize,
    indices: Vec<Vec<u32>>,
}

impl BasisRepr {
    fn from_basis(b: &MomentBasis) -> Self {
        BasisRepr {
            dim: b.dim,
            degree: b.degree,
            indices: b.indices.iter().map(|s| s.0.clone()).collect(),
        }
    }

    fn into_basis(self) -> Result<MomentBasis> {
        let basis = MomentBasis::new(self.dim, self.degree)?;
        if self.indices.len() != basis.len()
            || self
                .indices
                .iter()
                .zip(&basis.indices)
                .any(|(a, b)| a.as_slice() != b.exponents())
        {
            return Err(Error::invalid(
                "indices do not match the canonical basis order",
            ));
        }
        Ok(basis)
    }
}

impl Serialize for MomentBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BasisRepr::from_basis(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MomentBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        BasisRepr::deserialize(deserializer)?
            .into_basis()
            .map_err(D::Error::custom)
    }
}

/// Pooled feature values in canonical basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    basis: Arc<MomentBasis>,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn new(basis: Arc<MomentBasis>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(MomentVector { basis, values })
    }

    pub fn zeros(basis: Arc<MomentBasis>) -> Self {
        let values = vec![0.0; basis.len()];
        MomentVector { basis, values }
    }

    pub fn basis(&self) -> &MomentBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> &Arc<MomentBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of the monomial with the given exponents, if it is in the basis.
    pub fn get(&self, exponents: &[u32]) -> Option<f64> {
        self.basis.position(exponents).map(|i| self.values[i])
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &MomentVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn add_assign(&mut self, other: &[f64]) {
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += b;
        }
    }

    /// Componentwise sum; both vectors must share a basis.
    pub fn checked_add(&self, other: &MomentVector) -> Result<MomentVector> {
        if self.basis != other.basis {
            return Err(Error::invalid("moment vectors use different bases"));
        }
        let mut out = self.clone();
        out.add_assign(&other.values);
        Ok(out)
    }

    /// Restrict to monomials of total degree `≤ degree` (a prefix).
    pub fn truncate(&self, degree: usize) -> Result<MomentVector> {
        if degree == 0 || degree > self.basis.degree {
            return Err(Error::invalid(format!(
                "cannot truncate a degree-{} vector to degree {degree}",
                self.basis.degree
            )));
        }
        let basis = Arc::new(MomentBasis::new(self.basis.dim, degree)?);
        let values = self.values[..basis.len()].to_vec();
        Ok(MomentVector { basis, values })
    }
}

#[derive(Serialize, Deserialize)]
struct MomentRepr {
    #[serde(rename = "I")]
    dim: usize,
    #[serde(rename = "J")]
    degree: usize,
    indices: Vec<Vec<u32>>,
    values: Vec<f64>,
}

impl Serialize for MomentVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let b = BasisRepr::from_basis(&self.basis);
        MomentRepr {
            dim: b.dim,
            degree: b.degree,
            indices: b.indices,
            values: self.values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MomentVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = MomentRepr::deserialize(deserializer)?;
        let basis = BasisRepr {
            dim: r.dim,
            degree: r.degree,
            indices: r.indices,
        }
        .into_basis()
        .map_err(D::Error::custom)?;
        MomentVector::new(Arc::new(basis), r.values).map_err(D::Error::custom)
    }
}

/// A variable-size multiset of points in `[0, ∞)^I`. Point order carries no
/// meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            if p.iter().any(|&v| v < 0.0) {
                return Err(Error::invalid(format!(
                    "point {p:?} has a negative coordinate"
                )));
            }
        }
        Ok(PointSet { dim, points })
    }

    pub fn empty(dim: usize) -> Self {
        PointSet {
            dim,
            points: Vec::new(),
        }
    }

    /// Scalar points, `I = 1`.
    pub fn scalars(values: &[f64]) -> Result<Self> {
        PointSet::new(1, values.iter().map(|&v| vec![v]).collect())
    }

    /// Chunk a flat coordinate list into points of `dim` coordinates.
    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        if dim == 0 || !flat.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates cannot be split into points of dimension {dim}",
                flat.len()
            )));
        }
        PointSet::new(dim, flat.chunks(dim).map(<[f64]>::to_vec).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    /// The set with point `j` removed.
    pub fn without(&self, j: usize) -> Result<PointSet> {
        if j >= self.points.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.points.len(),
            });
        }
        let mut points = self.points.clone();
        points.remove(j);
        Ok(PointSet {
            dim: self.dim,
            points,
        })
    }

    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ok(PointSet {
            dim: self.dim,
            points,
        })
    }
}

/// `η(x)`: every basis monomial evaluated at one point.
pub fn eta(x: &[f64], basis: &Arc<MomentBasis>) -> Result<MomentVector> {
    if x.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut values = vec![0.0; basis.len()];
    basis.eta_into(x, &mut values);
    Ok(MomentVector {
        basis: Arc::clone(basis),
        values,
    })
}

/// Raised when more points are pooled than the basis degree can reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExceedsDegree {
    pub points: usize,
    pub degree: usize,
}

/// Sum of `η` over the points of `set`, flagging sets larger than the basis
/// degree (still pooled; they just cannot be reconstructed).
pub fn pool_with_warning(
    set: &PointSet,
    basis: &Arc<MomentBasis>,
) -> Result<(MomentVector, Option<ExceedsDegree>)> {
    if set.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: set.dim(),
        });
    }
    let mut acc = MomentVector::zeros(Arc::clone(basis));
    let mut scratch = vec![0.0; basis.len()];
    for p in set.points() {
        basis.eta_into(p, &mut scratch);
        acc.add_assign(&scratch);
    }
    let warning = (set.len() > basis.degree()).then_some(ExceedsDegree {
        points: set.len(),
        degree: basis.degree(),
    });
    Ok((acc, warning))
}

/// `Σ_k η(x_k)`; the empty set pools to the zero vector.
pub fn pool(set: &PointSet, basis: &Arc<MomentBasis>) -> Result<MomentVector> {
    pool_with_warning(set, basis).map(|(m, _)| m)
}

/// Pool many sets against one basis.
pub fn pool_batch(
    sets: &[PointSet],
    basis: &Arc<MomentBasis>,
    exec: Execution,
) -> Result<Vec<MomentVector>> {
    par::try_map(exec, sets, |s| pool(s, basis))
}

/// Pool of `set` with point `j` left out (the competitor aggregate of `j`).
pub fn pool_excluding(set: &PointSet, j: usize, basis: &Arc<MomentBasis>) -> Result<MomentVector> {
    pool(&set.without(j)?, basis)
}

/// Scalar power sums of the projections `w·x_k`:
/// `π_q = Σ_{|s|=q} multinomial(q; s) w^s m[s]` for `q = 1..=J`.
pub fn project_power_sums(m: &MomentVector, w: &[f64]) -> Result<Vec<f64>> {
    let basis = m.basis();
    if w.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: w.len(),
        });
    }
    Ok((1..=basis.degree())
        .map(|q| {
            basis
                .degree_range(q)
                .map(|pos| {
                    let s = &basis.indices()[pos];
                    s.multinomial() * s.eval(w) * m.values()[pos]
                })
                .sum()
        })
        .collect())
}

/// The firm-level aggregator of the nested representation: reconstruct a
/// portfolio from its moments, flatten the sorted padded matrix point by
/// point, and evaluate the outer feature map on it.
pub fn firm_features(
    inner: &MomentVector,
    outer: &Arc<MomentBasis>,
    config: &ReconstructConfig,
) -> Result<MomentVector> {
    let ib = inner.basis();
    if outer.dim() != ib.dim() * ib.degree() {
        return Err(Error::DimensionMismatch {
            expected: ib.dim() * ib.degree(),
            found: outer.dim(),
        });
    }
    let report = reconstruct::reconstruct(inner, config)?;
    eta(&report.matrix.flatten(), outer)
}

/// Own-portfolio moments and the summed rival firm features of the nested
/// representation.
///
/// `outer` must have dimension `I·J` and degree `F − 1`.
pub fn nested_pool(
    portfolios: &[PointSet],
    focal: usize,
    inner: &Arc<MomentBasis>,
    outer: &Arc<MomentBasis>,
    config: &ReconstructConfig,
) -> Result<(MomentVector, MomentVector)> {
    if focal >= portfolios.len() {
        return Err(Error::IndexOutOfRange {
            index: focal,
            len: portfolios.len(),
        });
    }
    if portfolios.len() > outer.degree() + 1 {
        return Err(Error::invalid(format!(
            "{} firms exceed the outer degree {} + 1",
            portfolios.len(),
            outer.degree()
        )));
    }
    for p in portfolios {
        if p.len() > inner.degree() {
            return Err(Error::invalid(format!(
                "portfolio of {} products exceeds J = {}",
                p.len(),
                inner.degree()
            )));
        }
    }
    let own = pool(&portfolios[focal], inner)?;
    let mut rivals = MomentVector::zeros(Arc::clone(outer));
    for (f, portfolio) in portfolios.iter().enumerate() {
        if f == focal {
            continue;
        }
        let m = pool(portfolio, inner)?;
        let features = firm_features(&m, outer, config)?;
        rivals.add_assign(features.values());
    }
    Ok((own, rivals))
}

/// Change of variables that moves a state space into `[0, ∞)^I`, or away
/// from zero so that the domain minimum is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DomainTransform {
    /// `x ↦ scale ⊙ x + offset`.
    Affine { scale: Vec<f64>, offset: Vec<f64> },
    /// `x ↦ exp(x)` coordinatewise; maps `[-M, M]` onto `[e^{-M}, e^{M}]`.
    Exp,
}

impl DomainTransform {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            DomainTransform::Affine { scale, offset } => {
                if scale.len() != x.len() || offset.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        found: scale.len().min(offset.len()),
                    });
                }
                Ok(x.iter()
                    .zip(scale.iter().zip(offset))
                    .map(|(v, (a, b))| a * v + b)
                    .collect())
            }
            DomainTransform::Exp => Ok(x.iter().map(|v| v.exp()).collect()),
        }
    }

    /// Transform raw (possibly negative) points into a valid [`PointSet`].
    pub fn apply_all(&self, dim: usize, points: &[Vec<f64>]) -> Result<PointSet> {
        let mapped = points
            .iter()
            .map(|p| self.apply(p))
            .collect::<Result<Vec<_>>>()?;
        PointSet::new(dim, mapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(i: usize, j: usize) -> Arc<MomentBasis> {
        Arc::new(exponent_basis(i, j).unwrap())
    }

    fn exps(b: &MomentBasis) -> Vec<Vec<u32>> {
        b.indices().iter().map(|s| s.exponents().to_vec()).collect()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(1, 3).unwrap(), 3);
        assert_eq!(kappa(2, 2).unwrap(), 5);
        assert_eq!(kappa(3, 2).unwrap(), 9);
    }

    #[test]
    fn kappa_matches_enumeration() {
        // Brute force: count s in {0..=J}^I with 1 <= |s| <= J.
        for i in 1..=4usize {
            for j in 1..=6usize {
                let mut count = 0;
                let total = (j + 1).pow(i as u32);
                for code in 0..total {
                    let mut c = code;
                    let mut deg = 0;
                    for _ in 0..i {
                        deg += c % (j + 1);
                        c /= j + 1;
                    }
                    if (1..=j).contains(&deg) {
                        count += 1;
                    }
                }
                assert_eq!(kappa(i, j).unwrap(), count, "I={i} J={j}");
            }
        }
    }

    #[test]
    fn kappa_overflow_is_an_error() {
        assert!(matches!(kappa(usize::MAX, 3), Err(Error::Overflow(_))));
        assert!(matches!(kappa(200, 200), Err(Error::Overflow(_))));
        assert!(matches!(kappa(0, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn basis_examples() {
        assert_eq!(exps(&basis(1, 3)), vec![vec![1], vec![2], vec![3]]);
        assert_eq!(
            exps(&basis(2, 2)),
            vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(exps(&basis(2, 1)), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn lower_degree_basis_is_prefix() {
        let b3 = basis(3, 4);
        let b2 = basis(3, 3);
        assert_eq!(&b3.indices()[..b2.len()], b2.indices());
        assert_eq!(b3.degree_range(2), 3..9);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(&[2.0], &basis(1, 3)).unwrap().values(), &[2.0, 4.0, 8.0]);
        assert_eq!(
            eta(&[2.0, 3.0], &basis(2, 2)).unwrap().values(),
            &[2.0, 3.0, 4.0, 6.0, 9.0]
        );
        assert_eq!(eta(&[0.0, 0.0], &basis(2, 2)).unwrap().values(), &[0.0; 5]);
        assert!(matches!(
            eta(&[f64::NAN], &basis(1, 2)),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn pool_examples() {
        let x = PointSet::scalars(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pool(&x, &basis(1, 3)).unwrap().values(), &[6.0, 14.0, 36.0]);
        assert_eq!(
            pool(&PointSet::empty(2), &basis(2, 2)).unwrap().values(),
            &[0.0; 5]
        );
        let y = PointSet::new(2, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(
            pool(&y, &basis(2, 2)).unwrap().values(),
            &[4.0, 6.0, 10.0, 14.0, 20.0]
        );
        assert!(matches!(
            pool(&y, &basis(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pooling_beyond_degree_warns() {
        let x = PointSet::scalars(&[1.0, 2.0, 3.0]).unwrap();
        let (m, w) = pool_with_warning(&x, &basis(1, 2)).unwrap();
        assert_eq!(m.values(), &[6.0, 14.0]);
        assert_eq!(
            w,
            Some(ExceedsDegree {
                points: 3,
                degree: 2
            })
        );
    }

    #[test]
    fn pool_excluding_examples() {
        let x = PointSet::scalars(&[5.0, 7.0]).unwrap();
        assert_eq!(pool_excluding(&x, 0, &basis(1, 1)).unwrap().values(), &[7.0]);
        let y = PointSet::new(2, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(
            pool_excluding(&y, 0, &basis(2, 2)).unwrap().values(),
            &[8.0, 10.0, 34.0, 42.0, 52.0]
        );
        let single = PointSet::scalars(&[4.0]).unwrap();
        assert_eq!(
            pool_excluding(&single, 0, &basis(1, 3)).unwrap().values(),
            &[0.0; 3]
        );
        assert!(matches!(
            pool_excluding(&x, 2, &basis(1, 1)),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn projection_examples() {
        let m = pool(&PointSet::new(2, vec![vec![2.0, 3.0]]).unwrap(), &basis(2, 2)).unwrap();
        let p = project_power_sums(&m, &[1.0, 1.0]).unwrap();
        assert_eq!(p, vec![5.0, 25.0]);
        // Axis projection picks out coordinate power sums.
        let m = pool(
            &PointSet::new(2, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            &basis(2, 3),
        )
        .unwrap();
        let p = project_power_sums(&m, &[0.0, 1.0]).unwrap();
        assert_eq!(
            p,
            vec![
                m.get(&[0, 1]).unwrap(),
                m.get(&[0, 2]).unwrap(),
                m.get(&[0, 3]).unwrap()
            ]
        );
        let m = pool(&PointSet::scalars(&[1.0, 2.0, 3.0]).unwrap(), &basis(1, 3)).unwrap();
        assert_eq!(project_power_sums(&m, &[1.0]).unwrap(), vec![6.0, 14.0, 36.0]);
    }

    #[test]
    fn multinomials() {
        assert_eq!(MultiIndex::new(vec![1, 1]).multinomial(), 2.0);
        assert_eq!(MultiIndex::new(vec![2, 1, 1]).multinomial(), 12.0);
        assert_eq!(MultiIndex::new(vec![3]).multinomial(), 1.0);
    }

    #[test]
    fn json_roundtrip_and_order_check() {
        let m = pool(&PointSet::scalars(&[1.0, 2.0, 3.0]).unwrap(), &basis(1, 3)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"I":1,"J":3,"indices":[[1],[2],[3]],"values":[6.0,14.0,36.0]}"#
        );
        let back: MomentVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"I":1,"J":3,"indices":[[2],[1],[3]],"values":[6.0,14.0,36.0]}"#;
        assert!(serde_json::from_str::<MomentVector>(bad).is_err());
        let short = r#"{"I":1,"J":3,"indices":[[1],[2],[3]],"values":[6.0]}"#;
        assert!(serde_json::from_str::<MomentVector>(short).is_err());
    }

    #[test]
    fn nested_pool_examples() {
        let cfg = ReconstructConfig::default();
        let inner = basis(1, 1);
        let outer = basis(1, 1);
        let portfolios = vec![
            PointSet::scalars(&[2.0]).unwrap(),
            PointSet::scalars(&[4.0]).unwrap(),
        ];
        let (own, rivals) = nested_pool(&portfolios, 0, &inner, &outer, &cfg).unwrap();
        assert_eq!(own.values(), &[2.0]);
        assert!((rivals.values()[0] - 4.0).abs() < 1e-12);

        // I=1, J=2, F=3: rivals {1,2} -> (2,1) and {3} -> (3,0).
        let inner = basis(1, 2);
        let outer = basis(2, 2);
        let portfolios = vec![
            PointSet::scalars(&[0.5]).unwrap(),
            PointSet::scalars(&[1.0, 2.0]).unwrap(),
            PointSet::scalars(&[3.0]).unwrap(),
        ];
        let (_, rivals) = nested_pool(&portfolios, 0, &inner, &outer, &cfg).unwrap();
        let expected: Vec<f64> = eta(&[2.0, 1.0], &outer)
            .unwrap()
            .values()
            .iter()
            .zip(eta(&[3.0, 0.0], &outer).unwrap().values())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(expected, vec![5.0, 1.0, 13.0, 2.0, 1.0]);
        for (a, b) in rivals.values().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }

        let alone = vec![PointSet::scalars(&[1.0]).unwrap()];
        let (_, rivals) = nested_pool(&alone, 0, &inner, &outer, &cfg).unwrap();
        assert_eq!(rivals.values(), &[0.0; 5]);
    }

    #[test]
    fn domain_transforms() {
        let t = DomainTransform::Exp;
        let s = t.apply_all(1, &[vec![-1.0], vec![0.0]]).unwrap();
        assert!((s.points()[0][0] - (-1.0f64).exp()).abs() < 1e-15);
        let a = DomainTransform::Affine {
            scale: vec![1.0, 2.0],
            offset: vec![3.0, 0.5],
        };
        assert_eq!(a.apply(&[-2.0, 1.0]).unwrap(), vec![1.0, 2.5]);
        assert!(a.apply_all(2, &[vec![-4.0, 0.0]]).is_err());
    }
}
