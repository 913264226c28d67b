//! Inversion of pooled moments back to the multiset that produced them.
//!
//! For `I = 1` the moments are the power sums `p_1..p_J` of the `J` padded
//! points; Newton's identities give the elementary symmetric polynomials and
//! the points are the roots of `z^J − e₁z^{J−1} + … + (−1)^J e_J`.
//!
//! For `I ≥ 2` the points are projected onto a random positive direction
//! `w`. The projections `y_k = w·x_k` are recovered as above. The weighted
//! sums `Σ_k y_k^q x_{k,i}` are linear in the moments, so each coordinate
//! follows from a Vandermonde solve in the distinct projection values. A
//! direction under which two different points collide is detected by the
//! moment residual and redrawn.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_core::{pool, project_power_sums, MomentBasis, MomentVector, PointSet};
use crate::par::{self, Execution};

/// Tolerances and seed for [`reconstruct`]. Relative tolerances are scaled
/// by `1 + max|value|` of the quantity they apply to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub seed: u64,
    pub max_retries: usize,
    /// Largest imaginary part accepted as a real root.
    pub imag_tol: f64,
    /// Projection values closer than this are treated as one point.
    pub cluster_tol: f64,
    /// Acceptance bound on the degree-normalized moment residual.
    pub residual_tol: f64,
    /// Negative coordinates down to `-clamp_tol` are noise and snap to zero.
    pub clamp_tol: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            seed: 0,
            max_retries: 16,
            imag_tol: 1e-8,
            cluster_tol: 1e-6,
            residual_tol: 1e-9,
            clamp_tol: 1e-8,
        }
    }
}

impl ReconstructConfig {
    pub fn with_seed(seed: u64) -> Self {
        ReconstructConfig {
            seed,
            ..Default::default()
        }
    }
}

/// `J` points in `[0, ∞)^I` sorted in descending lexicographic order, with
/// zero padding trailing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedPaddedMatrix {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

/// Descending lexicographic comparison; coordinates within `tol` count as
/// equal so that round-off cannot reorder tied points.
fn lex_desc(a: &[f64], b: &[f64], tol: f64) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > tol {
            return y.partial_cmp(x).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

impl SortedPaddedMatrix {
    /// Sort `points` and pad with zero columns up to `len`.
    pub fn from_points(dim: usize, len: usize, mut points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() > len {
            return Err(Error::invalid(format!(
                "{} points do not fit in {len} columns",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        points.resize(len, vec![0.0; dim]);
        let scale = 1.0 + points.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        // Insertion sort: the tolerant comparator is not a total order, and
        // the column count is small.
        for i in 1..points.len() {
            let mut k = i;
            while k > 0 && lex_desc(&points[k - 1], &points[k], tol) == Ordering::Greater {
                points.swap(k - 1, k);
                k -= 1;
            }
        }
        Ok(SortedPaddedMatrix {
            dim,
            columns: points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns `J`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Column-major flattening: the coordinates of each point in turn.
    pub fn flatten(&self) -> Vec<f64> {
        self.columns.iter().flatten().copied().collect()
    }

    /// Inverse of [`flatten`](Self::flatten); sorts the columns.
    pub fn unflatten(dim: usize, flat: &[f64]) -> Result<Self> {
        if dim == 0 || !flat.len().is_multiple_of(dim) {
            return Err(Error::invalid("flattened length is not a multiple of I"));
        }
        let cols = flat.chunks(dim).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let n = cols.len();
        SortedPaddedMatrix::from_points(dim, n, cols)
    }

    pub fn max_abs_diff(&self, other: &SortedPaddedMatrix) -> f64 {
        self.columns
            .iter()
            .flatten()
            .zip(other.columns.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub matrix: SortedPaddedMatrix,
    /// Degree-normalized deviation between `pool(matrix)` and the input.
    pub residual: f64,
    /// Number of projection directions redrawn before success.
    pub retries: usize,
}

/// Newton's identities: power sums `p_1..p_J` to elementary symmetric
/// polynomials `e_1..e_J`.
pub fn newton_to_elementary(p: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(p.len() + 1);
    e.push(1.0);
    for q in 1..=p.len() {
        let mut acc = 0.0;
        for r in 1..=q {
            let term = e[q - r] * p[r - 1];
            if r % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e.push(acc / q as f64);
    }
    e.remove(0);
    e
}

fn binom(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// Eigenvalues of the balanced companion matrix of the monic polynomial
/// `z^n − e₁z^{n−1} + … + (−1)^n e_n`.
fn companion_roots(e: &[f64]) -> Vec<Complex<f64>> {
    let n = e.len();
    if n == 1 {
        return vec![Complex::new(e[0], 0.0)];
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        // a_k = (-1)^k e_k; first row holds -a_k.
        let a = if k % 2 == 0 { -e[k] } else { e[k] };
        c[(0, k)] = -a;
    }
    for k in 1..n {
        c[(k, k - 1)] = 1.0;
    }
    balance(&mut c);
    c.complex_eigenvalues().iter().copied().collect()
}

/// Parlett–Reinsch diagonal similarity scaling by powers of two.
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Single-linkage clusters of complex values: `(mean, multiplicity)`.
fn cluster_complex(roots: &[Complex<f64>], tau: f64) -> Vec<(f64, usize)> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() <= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut out: Vec<(usize, f64, usize)> = Vec::new();
    for (i, z) in roots.iter().enumerate().take(n) {
        let r = find(&mut parent, i);
        match out.iter_mut().find(|(root, _, _)| *root == r) {
            Some(slot) => {
                slot.1 += z.re;
                slot.2 += 1;
            }
            None => out.push((r, z.re, 1)),
        }
    }
    out.into_iter()
        .map(|(_, sum, m)| (sum / m as f64, m))
        .collect()
}

/// Candidate multiplicity structures for the eigenvalues, as
/// `(value, multiplicity)` groups.
///
/// Eigenvalues are ordered by real part; every gap shorter than the coarsest
/// cluster radius is an optional merge point and all merge patterns are
/// tried. With too many short gaps, the single-linkage ladder is used instead.
fn groupings(roots: &[Complex<f64>], scale: f64) -> Vec<Vec<(f64, usize)>> {
    const MAX_OPTIONAL_GAPS: usize = 12;
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal));
    let radius = CLUSTER_LEVELS[0] * scale;
    let optional: Vec<usize> = (1..sorted.len())
        .filter(|&i| (sorted[i] - sorted[i - 1]).norm() <= radius)
        .collect();
    if optional.len() > MAX_OPTIONAL_GAPS {
        return CLUSTER_LEVELS
            .iter()
            .map(|&level| cluster_complex(roots, level * scale))
            .collect();
    }
    (0u32..1 << optional.len())
        .map(|mask| {
            let mut groups: Vec<(f64, usize)> = vec![(sorted[0].re, 1)];
            for (i, root) in sorted.iter().enumerate().skip(1) {
                let merge = optional
                    .iter()
                    .position(|&g| g == i)
                    .is_some_and(|bit| mask & (1 << bit) != 0);
                match groups.last_mut() {
                    Some((sum, m)) if merge => {
                        *sum += root.re;
                        *m += 1;
                    }
                    _ => groups.push((root.re, 1)),
                }
            }
            groups
                .into_iter()
                .map(|(sum, m)| (sum / m as f64, m))
                .collect()
        })
        .collect()
}

/// Descending coefficients `c_0 = 1, c_1, …` of `∏ (z − u_g)^{m_g}`.
fn expand(values: &[f64], mult: &[usize]) -> Vec<f64> {
    let mut c = vec![1.0];
    for (&u, &m) in values.iter().zip(mult) {
        for _ in 0..m {
            let mut next = vec![0.0; c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k] += ck;
                next[k + 1] -= u * ck;
            }
            c = next;
        }
    }
    c
}

/// What the clustered roots are matched against during refinement.
#[derive(Clone, Copy)]
enum Target<'a> {
    /// Elementary symmetric values `e_1..e_n` of the nonzero roots.
    Elementary(&'a [f64]),
    /// Power sums `p_1..p_J`; zero roots contribute nothing.
    PowerSums(&'a [f64]),
}

impl Target<'_> {
    fn len(&self) -> usize {
        match self {
            Target::Elementary(v) | Target::PowerSums(v) => v.len(),
        }
    }

    /// Scaled mismatch of the clustered roots.
    fn residual(&self, values: &[f64], mult: &[usize], r: f64) -> Vec<f64> {
        match *self {
            Target::Elementary(e) => {
                let n = e.len();
                let c = expand(values, mult);
                (1..=n)
                    .map(|k| {
                        let ek = if k % 2 == 0 { c[k] } else { -c[k] };
                        (ek - e[k - 1]) / (binom(n, k) * r.powi(k as i32))
                    })
                    .collect()
            }
            Target::PowerSums(p) => {
                let n = p.len() as f64;
                (1..=p.len())
                    .map(|q| {
                        let got: f64 = values
                            .iter()
                            .zip(mult)
                            .map(|(u, &m)| m as f64 * u.powi(q as i32))
                            .sum();
                        (got - p[q - 1]) / (n * r.powi(q as i32))
                    })
                    .collect()
            }
        }
    }

    fn jacobian(&self, values: &[f64], mult: &[usize], r: f64) -> DMatrix<f64> {
        let d = values.len();
        let rows = self.len();
        let mut jac = DMatrix::<f64>::zeros(rows, d);
        match *self {
            Target::Elementary(_) => {
                for g in 0..d {
                    // d/du_g ∏ = −m_g (z−u_g)^{m_g−1} ∏_{h≠g} (z−u_h)^{m_h}
                    let mut reduced = mult.to_vec();
                    reduced[g] -= 1;
                    let dcoef = expand(values, &reduced);
                    for k in 1..=rows {
                        let dc = -(mult[g] as f64) * dcoef[k - 1];
                        let de = if k % 2 == 0 { dc } else { -dc };
                        jac[(k - 1, g)] = de / (binom(rows, k) * r.powi(k as i32));
                    }
                }
            }
            Target::PowerSums(_) => {
                for g in 0..d {
                    for q in 1..=rows {
                        let dp = (mult[g] * q) as f64 * values[g].powi(q as i32 - 1);
                        jac[(q - 1, g)] = dp / (rows as f64 * r.powi(q as i32));
                    }
                }
            }
        }
        jac
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Gauss–Newton on the clustered roots. Multiple roots are parameterized by
/// a single value, which keeps the problem well conditioned. Close distinct
/// roots make the iteration non-monotone, so full steps are taken and the
/// best iterate is kept.
fn refine_roots(values: &mut [f64], mult: &[usize], target: Target<'_>, r: f64) -> f64 {
    let mut current = values.to_vec();
    let mut best = norm2(&target.residual(values, mult, r));
    for _ in 0..30 {
        if best == 0.0 {
            break;
        }
        let res = target.residual(&current, mult, r);
        let jac = target.jacobian(&current, mult, r);
        if res.iter().chain(jac.iter()).any(|v| !v.is_finite()) {
            break;
        }
        let Ok(step) = jac.svd(true, true).solve(&DVector::from_vec(res), 1e-15) else {
            break;
        };
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }
        for (u, s) in current.iter_mut().zip(step.iter()) {
            *u -= s;
        }
        let now = norm2(&target.residual(&current, mult, r));
        if now < best {
            best = now;
            values.copy_from_slice(&current);
        }
        if step.amax() <= 1e-15 * r {
            break;
        }
    }
    best
}

/// Single-linkage radii, coarsest first, as multiples of the root scale.
const CLUSTER_LEVELS: [f64; 12] = [
    3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-10, 1e-12, 0.0,
];
/// Clusterings whose refined residual exceeds this are not root sets.
const COEFFICIENT_TOL: f64 = 1e-10;

/// Roots of the monic polynomial with elementary coefficients `e`, in
/// descending order. The roots must be real and nonnegative up to `tol`
/// (relative to `1 + max|root|`).
///
/// Trailing coefficients that vanish to round-off are treated as exact
/// zeros so that padded points come back as exact zeros. A multiple root
/// splits into a tight cluster of eigenvalues; among the clusterings that
/// reproduce the coefficients to round-off, the coarsest one is kept.
pub fn elementary_to_multiset(e: &[f64], tol: f64) -> Result<Vec<f64>> {
    roots_matching(e, None, tol)
}

/// The multiset whose power sums are `p`, in descending order. Same as
/// `elementary_to_multiset(newton_to_elementary(p))`, but roots are refined
/// against `p` itself, which is evaluated without cancellation.
pub fn power_sums_to_multiset(p: &[f64], tol: f64) -> Result<Vec<f64>> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    roots_matching(&newton_to_elementary(p), Some(p), tol)
}

fn roots_matching(e: &[f64], p: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let total = e.len();
    let r = (1..=total)
        .map(|k| (e[k - 1].abs() / binom(total, k)).powf(1.0 / k as f64))
        .fold(0.0f64, f64::max);
    if r == 0.0 {
        return Ok(vec![0.0; total]);
    }
    let degree = (1..=total)
        .rev()
        .find(|&k| e[k - 1].abs() > 1e-12 * binom(total, k) * r.powi(k as i32))
        .unwrap_or(0);
    let e_nz = &e[..degree];
    let target = match p {
        Some(p) => Target::PowerSums(p),
        None => Target::Elementary(e_nz),
    };
    let mut out = Vec::with_capacity(total);
    if degree > 0 {
        let roots = companion_roots(e_nz);
        let rmax = roots.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let scale = 1.0 + rmax;
        // Normalizing by the largest root bounds every scaled term by one.
        let r = if rmax > 0.0 { rmax } else { r };
        let max_imag = roots.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        let mut candidates = Vec::new();
        // Real parts seed the refinement even when a tight cluster came out
        // complex; only a real root set that fits is accepted.
        for groups in groupings(&roots, scale) {
            let mut values: Vec<f64> = groups.iter().map(|&(v, _)| v).collect();
            let mult: Vec<usize> = groups.iter().map(|&(_, m)| m).collect();
            let res = refine_roots(&mut values, &mult, target, r);
            if res <= COEFFICIENT_TOL {
                candidates.push((res, values, mult));
            }
        }
        let floor = candidates.iter().fold(f64::INFINITY, |m, c| m.min(c.0));
        let accepted = candidates
            .into_iter()
            .filter(|c| c.0 <= 10.0 * floor + 1e-15)
            .min_by(|a, b| {
                a.1.len()
                    .cmp(&b.1.len())
                    .then(a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal))
            })
            .map(|(_, v, m)| (v, m));
        let Some((values, mult)) = accepted else {
            return Err(Error::NonRealRoots {
                max_imag: max_imag.max(tol * scale),
            });
        };
        for (v, m) in values.into_iter().zip(mult) {
            if v < -tol * scale {
                return Err(Error::NegativeRoot { value: v });
            }
            out.extend(std::iter::repeat_n(v.max(0.0), m));
        }
    }
    out.resize(total, 0.0);
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    Ok(out)
}

/// Deviation between `pool(points)` and `m`, per component, normalized by
/// `1 +` the largest moment of the same total degree.
pub fn moment_residual(points: &[Vec<f64>], m: &MomentVector, basis: &Arc<MomentBasis>) -> Result<f64> {
    let set = PointSet::new(basis.dim(), points.to_vec())?;
    let got = pool(&set, basis)?;
    let mut worst = 0.0f64;
    for d in 1..=basis.degree() {
        let range = basis.degree_range(d);
        let norm = m.values()[range.clone()]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        for pos in range {
            let dev = (got.values()[pos] - m.values()[pos]).abs() / (1.0 + norm);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// Distinct projection values (descending) with multiplicities, merging
/// neighbors closer than `tol`.
fn group_sorted(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NAN;
    for &v in values {
        match groups.last_mut() {
            Some((sum, m)) if (last - v).abs() <= tol => {
                *sum += v;
                *m += 1;
            }
            _ => groups.push((v, 1)),
        }
        last = v;
    }
    groups
        .into_iter()
        .map(|(sum, m)| (sum / m as f64, m))
        .collect()
}

/// `c_{i,q} = Σ_{|s|=q} multinomial(q; s) w^s m[s + e_i] = Σ_k (w·x_k)^q x_{k,i}`
/// for `q = 0..J−1`.
fn weighted_coordinate_sums(m: &MomentVector, w: &[f64], coord: usize) -> Vec<f64> {
    let basis = m.basis();
    let dim = basis.dim();
    let mut out = Vec::with_capacity(basis.degree());
    let mut shifted = vec![0u32; dim];
    shifted[coord] = 1;
    out.push(m.values()[basis.position(&shifted).expect("unit index in basis")]);
    for q in 1..basis.degree() {
        let sum = basis
            .degree_range(q)
            .map(|pos| {
                let s = &basis.indices()[pos];
                let mut up = s.exponents().to_vec();
                up[coord] += 1;
                let at = basis.position(&up).expect("degree q+1 index in basis");
                s.multinomial() * s.eval(w) * m.values()[at]
            })
            .sum();
        out.push(sum);
    }
    out
}

/// Scaled moment mismatch of distinct points `xs` with multiplicities.
fn moment_mismatch(xs: &[Vec<f64>], mult: &[usize], m: &MomentVector, norms: &[f64]) -> Vec<f64> {
    let basis = m.basis();
    basis
        .indices()
        .iter()
        .zip(m.values())
        .map(|(s, &target)| {
            let got: f64 = xs.iter().zip(mult).map(|(x, &k)| k as f64 * s.eval(x)).sum();
            (got - target) / norms[s.degree() as usize]
        })
        .collect()
}

/// Gauss–Newton on the full moment equations, starting from a projected
/// solution. Removes the error introduced by ill-conditioned Vandermonde
/// solves when projections nearly collide.
fn polish_points(xs: &mut [Vec<f64>], mult: &[usize], m: &MomentVector) {
    let basis = m.basis();
    let dim = basis.dim();
    let mut norms = vec![1.0; basis.degree() + 1];
    for (d, n) in norms.iter_mut().enumerate().skip(1) {
        *n += m.values()[basis.degree_range(d)]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let unknowns = xs.len() * dim;
    let mut res = moment_mismatch(xs, mult, m, &norms);
    let mut best = max_abs(&res);
    for _ in 0..20 {
        if best == 0.0 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(basis.len(), unknowns);
        for (row, s) in basis.indices().iter().enumerate() {
            let exps = s.exponents();
            let scale = norms[s.degree() as usize];
            for (g, x) in xs.iter().enumerate() {
                for i in 0..dim {
                    if exps[i] == 0 {
                        continue;
                    }
                    let mut lowered = exps.to_vec();
                    lowered[i] -= 1;
                    let mono: f64 = lowered.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product();
                    jac[(row, g * dim + i)] = mult[g] as f64 * exps[i] as f64 * mono / scale;
                }
            }
        }
        let rhs = DVector::from_vec(res.clone());
        let Ok(step) = jac.svd(true, true).solve(&rhs, 1e-14) else {
            break;
        };
        let trial: Vec<Vec<f64>> = xs
            .iter()
            .enumerate()
            .map(|(g, x)| (0..dim).map(|i| (x[i] - step[g * dim + i]).max(0.0)).collect())
            .collect();
        let trial_res = moment_mismatch(&trial, mult, m, &norms);
        let trial_best = max_abs(&trial_res);
        if trial_best < best {
            xs.clone_from_slice(&trial);
            res = trial_res;
            best = trial_best;
        } else {
            break;
        }
    }
}

/// One projection attempt for `I ≥ 2`.
fn reconstruct_projected(m: &MomentVector, w: &[f64], cfg: &ReconstructConfig) -> Result<Vec<Vec<f64>>> {
    let basis = m.basis();
    let (dim, total) = (basis.dim(), basis.degree());
    let p = project_power_sums(m, w)?;
    let y = power_sums_to_multiset(&p, cfg.imag_tol)?;
    let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let groups: Vec<(f64, usize)> = group_sorted(&y, cfg.cluster_tol * scale)
        .into_iter()
        .filter(|&(u, _)| u > cfg.cluster_tol * scale)
        .collect();
    if groups.is_empty() {
        return Ok(Vec::new());
    }
    let umax = groups[0].0;
    let d = groups.len();
    let mut vander = DMatrix::<f64>::zeros(total, d);
    for q in 0..total {
        for (g, &(u, _)) in groups.iter().enumerate() {
            vander[(q, g)] = (u / umax).powi(q as i32);
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(total, dim);
    for i in 0..dim {
        for (q, c) in weighted_coordinate_sums(m, w, i).into_iter().enumerate() {
            rhs[(q, i)] = c / umax.powi(q as i32);
        }
    }
    let sums = vander
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::invalid(format!("Vandermonde solve: {e}")))?;
    let coord_scale = 1.0 + max_abs(sums.as_slice());
    let mult: Vec<usize> = groups.iter().map(|&(_, k)| k).collect();
    let mut xs = Vec::with_capacity(d);
    for (g, &k) in mult.iter().enumerate() {
        let mut x = Vec::with_capacity(dim);
        for i in 0..dim {
            let v = sums[(g, i)] / k as f64;
            if v < -cfg.clamp_tol * coord_scale {
                return Err(Error::NegativeRoot { value: v });
            }
            x.push(v.max(0.0));
        }
        xs.push(x);
    }
    polish_points(&mut xs, &mult, m);
    Ok(xs
        .into_iter()
        .zip(mult)
        .flat_map(|(x, k)| std::iter::repeat_n(x, k))
        .collect())
}

/// Invert `m = pool(X, basis(I, J))` to the sorted matrix of `X` padded with
/// zero points to exactly `J` columns.
pub fn reconstruct(m: &MomentVector, cfg: &ReconstructConfig) -> Result<ReconstructionReport> {
    let basis = m.basis_arc();
    let (dim, total) = (basis.dim(), basis.degree());
    if dim == 1 {
        let points = power_sums_to_multiset(m.values(), cfg.imag_tol)
            .map_err(|e| Error::ReconstructionFailed {
                residual: f64::INFINITY,
                retries: 0,
                reason: e.to_string(),
            })?;
        let columns: Vec<Vec<f64>> = points.into_iter().map(|v| vec![v]).collect();
        let residual = moment_residual(&columns, m, basis)?;
        if residual > cfg.residual_tol {
            return Err(Error::ReconstructionFailed {
                residual,
                retries: 0,
                reason: "moment residual above tolerance".into(),
            });
        }
        return Ok(ReconstructionReport {
            matrix: SortedPaddedMatrix::from_points(1, total, columns)?,
            residual,
            retries: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_residual = f64::INFINITY;
    let mut last_reason = String::new();
    for attempt in 0..=cfg.max_retries {
        let w = random_direction(&mut rng, dim);
        match reconstruct_projected(m, &w, cfg) {
            Ok(points) if points.len() <= total => {
                let residual = moment_residual(&points, m, basis)?;
                if residual <= cfg.residual_tol {
                    return Ok(ReconstructionReport {
                        matrix: SortedPaddedMatrix::from_points(dim, total, points)?,
                        residual,
                        retries: attempt,
                    });
                }
                last_residual = residual;
                last_reason = "moment residual above tolerance".into();
            }
            Ok(points) => {
                last_reason = format!("{} points recovered for J = {total}", points.len());
            }
            Err(e) => last_reason = e.to_string(),
        }
    }
    Err(Error::ReconstructionFailed {
        residual: last_residual,
        retries: cfg.max_retries,
        reason: last_reason,
    })
}

pub fn reconstruct_batch(
    ms: &[MomentVector],
    cfg: &ReconstructConfig,
    exec: Execution,
) -> Vec<Result<ReconstructionReport>> {
    par::map(exec, ms, |m| reconstruct(m, cfg))
}

/// Drop columns whose coordinates are all `≤ tol`.
pub fn strip_zeros(matrix: &SortedPaddedMatrix, tol: f64) -> PointSet {
    let points = matrix
        .columns()
        .iter()
        .filter(|c| c.iter().any(|&v| v > tol))
        .cloned()
        .collect();
    PointSet::new(matrix.dim(), points).expect("columns of a sorted padded matrix are valid points")
}
