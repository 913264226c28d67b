//! Common policy functions across markets of different sizes.
//!
//! An outcome of firm `j` in market `m` is modeled as
//! `g̃(s_jm, {Σ_{k≠j} η_{I,K}(s_km)}, y_m)` with `g̃` a ridge-regularized
//! polynomial of total degree `D`. Because the competitor block enters only
//! through pooled moments, one fitted model serves every market size.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_core::{eta, pool, MomentBasis, PointSet};
use crate::par::{self, Execution};

/// Relative singular value cutoff for the least-squares solve.
const RCOND: f64 = 1e-12;

/// One firm-market observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSample {
    pub market_id: String,
    pub firm_id: String,
    pub own: Vec<f64>,
    pub competitors: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub outcome: f64,
}

impl MarketSample {
    pub fn new(own: Vec<f64>, competitors: Vec<Vec<f64>>, y: Vec<f64>, outcome: f64) -> Self {
        MarketSample {
            market_id: String::new(),
            firm_id: String::new(),
            own,
            competitors,
            y,
            outcome,
        }
    }

    pub fn dim(&self) -> usize {
        self.own.len()
    }

    /// Number of firms in the market, the sample's own firm included.
    pub fn market_size(&self) -> usize {
        self.competitors.len() + 1
    }
}

/// Feature layout for state dimension `I`, truncation `K`, `C` exogenous
/// variables and polynomial degree `D`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    dim: usize,
    exogenous_dim: usize,
    moments: Arc<MomentBasis>,
    monomials: Arc<MomentBasis>,
}

impl FeatureMap {
    pub fn new(dim: usize, k: usize, exogenous_dim: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::invalid("K and D must be at least 1"));
        }
        let moments = Arc::new(MomentBasis::new(dim, k)?);
        let inputs = dim + moments.len() + exogenous_dim;
        let monomials = Arc::new(MomentBasis::new(inputs, d)?);
        Ok(FeatureMap {
            dim,
            exogenous_dim,
            moments,
            monomials,
        })
    }

    /// Row length, the constant included.
    pub fn len(&self) -> usize {
        1 + self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of `[own, moments, y]`.
    pub fn inputs(&self) -> usize {
        self.monomials.dim()
    }

    pub fn moment_basis(&self) -> &Arc<MomentBasis> {
        &self.moments
    }

    pub fn row(&self, sample: &MarketSample) -> Result<Vec<f64>> {
        if sample.own.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: sample.own.len(),
            });
        }
        if sample.y.len() != self.exogenous_dim {
            return Err(Error::DimensionMismatch {
                expected: self.exogenous_dim,
                found: sample.y.len(),
            });
        }
        let comps = PointSet::new(self.dim, sample.competitors.clone())?;
        let m = pool(&comps, &self.moments)?;
        let mut z = Vec::with_capacity(self.inputs());
        z.extend_from_slice(&sample.own);
        z.extend_from_slice(m.values());
        z.extend_from_slice(&sample.y);
        let mono = eta(&z, &self.monomials)?;
        let mut row = Vec::with_capacity(self.len());
        row.push(1.0);
        row.extend_from_slice(mono.values());
        Ok(row)
    }
}

/// The constant followed by every monomial of degree `1..=D` in
/// `[own, pool(competitors, basis(I, K)), y]`, in canonical order.
pub fn design_features(sample: &MarketSample, k: usize, d: usize) -> Result<Vec<f64>> {
    FeatureMap::new(sample.dim(), k, sample.y.len(), d)?.row(sample)
}

/// A ridge regression on standardized polynomial moment features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub version: String,
    #[serde(rename = "I")]
    pub dim: usize,
    #[serde(rename = "C")]
    pub exogenous_dim: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub lambda: f64,
    /// Means of the non-constant features.
    pub means: Vec<f64>,
    /// Standard deviations of the non-constant features; 1 for constant columns.
    pub scales: Vec<f64>,
    /// Intercept on standardized features (the outcome mean).
    pub intercept: f64,
    /// Slopes on standardized features.
    pub coefficients: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
    pub training_rmse: f64,
}

impl FittedModel {
    pub fn feature_map(&self) -> Result<FeatureMap> {
        FeatureMap::new(self.dim, self.k, self.exogenous_dim, self.d)
    }

    /// Coefficients on the raw feature row, constant first.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let slopes: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift: f64 = slopes.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        std::iter::once(self.intercept - shift).chain(slopes).collect()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row[1..]
                .iter()
                .zip(self.means.iter().zip(&self.scales))
                .zip(&self.coefficients)
                .map(|((f, (m, s)), b)| b * (f - m) / s)
                .sum::<f64>()
    }

    pub fn predict(&self, sample: &MarketSample) -> Result<f64> {
        let row = self.feature_map()?.row(sample)?;
        Ok(self.predict_row(&row))
    }

    pub fn predict_batch(&self, samples: &[MarketSample], exec: Execution) -> Result<Vec<f64>> {
        let map = self.feature_map()?;
        par::try_map(exec, samples, |s| map.row(s).map(|r| self.predict_row(&r)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(s)?;
        let p = model.feature_map()?.len() - 1;
        if model.means.len() != p || model.scales.len() != p || model.coefficients.len() != p {
            return Err(Error::invalid(format!(
                "model has {} coefficients but its layout needs {p}",
                model.coefficients.len()
            )));
        }
        Ok(model)
    }
}

pub fn predict(model: &FittedModel, sample: &MarketSample) -> Result<f64> {
    model.predict(sample)
}

/// Fit `outcome ≈ features·β` minimizing `‖r‖² + λ‖β‖²` with the constant
/// unpenalized. Features are standardized first; with `λ = 0` a
/// rank-deficient design gets the minimum-norm solution and is flagged.
pub fn fit(samples: &[MarketSample], k: usize, d: usize, lambda: f64) -> Result<FittedModel> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("cannot fit an empty dataset"))?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let largest = samples.iter().map(MarketSample::market_size).max().unwrap_or(1);
    if k > largest.saturating_sub(1).max(1) {
        return Err(Error::invalid(format!(
            "K = {k} exceeds J - 1 = {} for the largest market in the data",
            largest - 1
        )));
    }
    if samples.iter().any(|s| !s.outcome.is_finite()) {
        return Err(Error::invalid("every training sample needs a finite outcome"));
    }
    let map = FeatureMap::new(first.dim(), k, first.y.len(), d)?;
    let rows = samples
        .iter()
        .map(|s| map.row(s))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let p = map.len() - 1;

    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for c in 0..p {
        let col = rows.iter().map(|r| r[c + 1]);
        let mean = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        means[c] = mean;
        let sd = var.sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            scales[c] = sd;
        }
    }
    let z = DMatrix::from_fn(n, p, |i, c| (rows[i][c + 1] - means[c]) / scales[c]);
    let ybar = samples.iter().map(|s| s.outcome).sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, samples.iter().map(|s| s.outcome - ybar));

    let (beta, rank) = if p == 0 {
        (DVector::zeros(0), 0)
    } else {
        ridge_solve(z.clone(), &yc, lambda)
    };
    let resid = &yc - &z * &beta;
    let training_rmse = (resid.norm_squared() / n as f64).sqrt();
    Ok(FittedModel {
        version: crate::VERSION.to_string(),
        dim: map.dim,
        exogenous_dim: map.exogenous_dim,
        k,
        d,
        lambda,
        means,
        scales,
        intercept: ybar,
        coefficients: beta.iter().copied().collect(),
        rank,
        rank_deficient: rank < p,
        training_rmse,
    })
}

fn ridge_solve(z: DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> (DVector<f64>, usize) {
    let p = z.ncols();
    let svd = z.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = RCOND * smax * (z_dim_scale(u.nrows(), p));
    let uty = u.transpose() * y;
    let mut rank = 0;
    let mut coef = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            rank += 1;
            coef[i] = s / (s * s + lambda) * uty[i];
        }
    }
    (vt.transpose() * coef, rank)
}

fn z_dim_scale(n: usize, p: usize) -> f64 {
    n.max(p) as f64
}

/// Group CSV rows (`market_id, firm_id, s_1..s_I, y_1..y_C[, outcome]`)
/// into samples. Competitors are the other firms of the same market.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<MarketSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[0] != "market_id" || names[1] != "firm_id" {
        return Err(Error::invalid(
            "CSV header must start with market_id, firm_id, s_1",
        ));
    }
    let mut pos = 2;
    let mut dim = 0;
    while pos < names.len() && names[pos] == format!("s_{}", dim + 1) {
        dim += 1;
        pos += 1;
    }
    let mut exogenous = 0;
    while pos < names.len() && names[pos] == format!("y_{}", exogenous + 1) {
        exogenous += 1;
        pos += 1;
    }
    let has_outcome = pos < names.len() && names[pos] == "outcome";
    if has_outcome {
        pos += 1;
    }
    if dim == 0 || pos != names.len() {
        return Err(Error::invalid(format!(
            "unexpected CSV header {names:?}; expected market_id, firm_id, s_1..s_I, y_1..y_C, outcome"
        )));
    }

    struct Row {
        firm: String,
        s: Vec<f64>,
        y: Vec<f64>,
        outcome: f64,
    }
    let mut order: Vec<String> = Vec::new();
    let mut markets: HashMap<String, Vec<Row>> = HashMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| {
                Error::invalid(format!(
                    "row {}: column {} is not a number: {raw:?}",
                    line + 2,
                    names[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            Ok(v)
        };
        let s = (2..2 + dim).map(field).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = s.iter().find(|v| **v < 0.0) {
            return Err(Error::invalid(format!(
                "row {}: state coordinate {bad} is negative",
                line + 2
            )));
        }
        let y = (2 + dim..2 + dim + exogenous)
            .map(field)
            .collect::<Result<Vec<_>>>()?;
        let outcome = if has_outcome { field(pos - 1)? } else { f64::NAN };
        let market = record[0].to_string();
        let firm = record[1].to_string();
        let rows = markets.entry(market.clone()).or_insert_with(|| {
            order.push(market.clone());
            Vec::new()
        });
        if rows.iter().any(|r| r.firm == firm) {
            return Err(Error::invalid(format!(
                "row {}: firm {firm:?} appears twice in market {market:?}",
                line + 2
            )));
        }
        if let Some(first) = rows.first() {
            if first.y != y {
                return Err(Error::invalid(format!(
                    "row {}: market {market:?} has inconsistent y values",
                    line + 2
                )));
            }
        }
        rows.push(Row { firm, s, y, outcome });
    }

    let mut samples = Vec::new();
    for market in order {
        let rows = &markets[&market];
        for (j, r) in rows.iter().enumerate() {
            let competitors = rows
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, c)| c.s.clone())
                .collect();
            samples.push(MarketSample {
                market_id: market.clone(),
                firm_id: r.firm.clone(),
                own: r.s.clone(),
                competitors,
                y: r.y.clone(),
                outcome: r.outcome,
            });
        }
    }
    Ok(samples)
}

pub fn read_csv_path(path: &Path) -> Result<Vec<MarketSample>> {
    read_csv(std::fs::File::open(path)?)
}

/// Predictions with and without a merger of two firms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub before: Vec<f64>,
    /// Surviving firms in original order; the merged firm takes the lower index.
    pub after: Vec<f64>,
    pub merged_index: usize,
    pub merged_state: Vec<f64>,
}

/// Componentwise sum of two states.
pub fn sum_states(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn market_samples(states: &[Vec<f64>], y: &[f64]) -> Vec<MarketSample> {
    (0..states.len())
        .map(|j| {
            let competitors = states
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, s)| s.clone())
                .collect();
            MarketSample::new(states[j].clone(), competitors, y.to_vec(), f64::NAN)
        })
        .collect()
}

/// Merge firms `merge.0` and `merge.1` (0-based) with `combine` and predict
/// every firm before and after.
pub fn counterfactual_merge<F>(
    model: &FittedModel,
    states: &[Vec<f64>],
    y: &[f64],
    merge: (usize, usize),
    combine: F,
) -> Result<MergeOutcome>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    let n = states.len();
    if n < 2 {
        return Err(Error::invalid("a merger needs at least two firms"));
    }
    let (a, b) = merge;
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if a == b {
        return Err(Error::invalid("a firm cannot merge with itself"));
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let merged = combine(&states[lo], &states[hi]);
    if merged.len() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            found: merged.len(),
        });
    }
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for (k, s) in states.iter().enumerate() {
        if k == lo {
            post.push(merged.clone());
        } else if k != hi {
            post.push(s.clone());
        }
    }
    let before = market_samples(states, y)
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<Vec<_>>>()?;
    let after = market_samples(&post, y)
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(MergeOutcome {
        before,
        after,
        merged_index: lo,
        merged_state: merged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub features: usize,
    pub training_rmse: f64,
    pub max_abs_error: f64,
}

/// Training fit for each truncation degree in `ks`.
pub fn k_sweep(samples: &[MarketSample], ks: &[usize], d: usize, lambda: f64) -> Result<Vec<KSweepRow>> {
    ks.iter()
        .map(|&k| {
            let model = fit(samples, k, d, lambda)?;
            let pred = model.predict_batch(samples, Execution::Sequential)?;
            let max_abs_error = pred
                .iter()
                .zip(samples)
                .fold(0.0f64, |m, (p, s)| m.max((p - s.outcome).abs()));
            Ok(KSweepRow {
                k,
                features: model.coefficients.len() + 1,
                training_rmse: model.training_rmse,
                max_abs_error,
            })
        })
        .collect()
}
