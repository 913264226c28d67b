//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use moment_rep::approx::{counterfactual_merge, fit, k_sweep, sum_states, MarketSample};
use moment_rep::cli::{agg_check, cournot_payoff, PolynomialPayoff};
use moment_rep::extension::{
    extend, weighted_subset_sum, Condition, DomainSpec, SlotWeight, SymmetricFunction,
};
use moment_rep::games::{compare_mme_mpe, moment_state_count, GameSpec, SolverOptions};
use moment_rep::reconstruct::{power_sums_to_multiset, SortedPaddedMatrix};
use moment_rep::represent::{build_nested_psi, build_psi, build_psi_conditional, BuiltinFunction};
use moment_rep::{exponent_basis, kappa, pool, reconstruct, MomentBasis, PointSet, ReconstructConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn c1_kappa() -> Outcome {
    let mut worst = String::new();
    for dim in 1..=4usize {
        for degree in 1..=6usize {
            // Brute-force count of exponent tuples with total degree 1..=J.
            let mut count = 0u64;
            let mut e = vec![0usize; dim];
            loop {
                let s: usize = e.iter().sum();
                if (1..=degree).contains(&s) {
                    count += 1;
                }
                let mut i = 0;
                while i < dim {
                    e[i] += 1;
                    if e[i] <= degree {
                        break;
                    }
                    e[i] = 0;
                    i += 1;
                }
                if i == dim {
                    break;
                }
            }
            let len = exponent_basis(dim, degree).unwrap().len() as u64;
            let formula = binomial((degree + dim) as u64, dim as u64) - 1;
            if len != formula || len != count || kappa(dim, degree).unwrap() as u64 != formula {
                worst = format!("I={dim} J={degree}: basis {len}, formula {formula}, brute force {count}");
            }
        }
    }
    let k22 = kappa(2, 2).unwrap();
    outcome(worst.is_empty() && k22 == 5, if worst.is_empty() { format!("24 (I,J) pairs exact; kappa(2,2) = {k22}") } else { worst })
}

fn c2_roundtrip() -> Outcome {
    let mut r = rng(2);
    let cfg = ReconstructConfig::default();
    let mut worst = 0.0f64;
    let mut duplicates = 0;
    let mut failures = 0;
    for case in 0..1000 {
        let dim = r.gen_range(1..=3);
        let degree = r.gen_range(1..=5);
        let n = r.gen_range(1..=degree);
        let mut pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| r.gen_range(0.1..10.0)).collect())
            .collect();
        if case % 5 == 0 && n >= 2 {
            let src = r.gen_range(0..n);
            let dst = (src + 1 + r.gen_range(0..n - 1)) % n;
            pts[dst] = pts[src].clone();
            duplicates += 1;
        }
        let basis = Arc::new(MomentBasis::new(dim, degree).unwrap());
        let m = pool(&PointSet::new(dim, pts.clone()).unwrap(), &basis).unwrap();
        let want = SortedPaddedMatrix::from_points(dim, degree, pts).unwrap();
        match reconstruct(&m, &cfg) {
            Ok(rep) => worst = worst.max(rep.matrix.max_abs_diff(&want)),
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && worst <= 1e-6 && duplicates >= 50,
        format!("1000 cases, {duplicates} with duplicates, {failures} failures, max coordinate error {worst:.2e}"),
    )
}

fn c3_newton() -> Outcome {
    let a = power_sums_to_multiset(&[6.0, 14.0, 36.0], 1e-8).unwrap();
    let b = power_sums_to_multiset(&[2.0, 4.0, 8.0], 1e-8).unwrap();
    let ea = a.iter().zip([3.0, 2.0, 1.0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let eb = b.iter().zip([2.0, 0.0, 0.0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    outcome(ea < 1e-9 && eb < 1e-9, format!("{a:?} (err {ea:.1e}), {b:?} (err {eb:.1e})"))
}

/// Quadratic least-squares fit of `values` at `t`, evaluated at `t = 0`.
fn extrapolate_to_zero(t: &[f64], values: &[f64]) -> f64 {
    let a = nalgebra::DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(j as i32));
    let y = nalgebra::DVector::from_column_slice(values);
    let coef = a.svd(true, true).solve(&y, 1e-14).unwrap();
    coef[0]
}

/// Gap between the limit of `f(lo − t)` as `t ↓ 0` and the value at `lo`,
/// from steps `t_k = k·1e-4`.
fn boundary_gap(f: impl Fn(f64) -> f64, lo: f64) -> (f64, bool) {
    let t: Vec<f64> = (1..=8).map(|k| k as f64 * 1e-4).collect();
    let values: Vec<f64> = t.iter().map(|&s| f(lo - s)).collect();
    let at = f(lo);
    let dist: Vec<f64> = values.iter().map(|v| (v - at).abs()).collect();
    let monotone = dist.windows(2).all(|w| w[0] <= w[1] + 1e-15);
    ((extrapolate_to_zero(&t, &values) - at).abs(), monotone)
}

fn c4_extension() -> Outcome {
    let mut r = rng(4);
    let v = |p: &[Vec<f64>]| -> f64 {
        p.iter().map(|x| x.iter().product::<f64>()).sum::<f64>() + p.iter().map(|x| x[0]).sum::<f64>().powi(2)
    };
    let mut pad_err = 0.0f64;
    for _ in 0..1000 {
        let dim = r.gen_range(1..=3);
        let slots = r.gen_range(1..=5);
        let d = DomainSpec::cube(dim, 0.5, 4.0, Condition::A).unwrap();
        let e = extend(v, d.clone(), slots).unwrap();
        let n = r.gen_range(1..=slots);
        let x: Vec<Vec<f64>> = (0..n).map(|_| d.sample(&mut r)).collect();
        let mut padded = x.clone();
        padded.resize(slots, vec![0.0; dim]);
        pad_err = pad_err.max((e.eval(&padded).unwrap() - v(&x)).abs());
    }

    let sum = |p: &[Vec<f64>]| p.iter().map(|x| x[0]).sum::<f64>();
    let d1 = DomainSpec::cube(1, 1.0, 2.0, Condition::A).unwrap();
    let e1 = extend(sum, d1.clone(), 2).unwrap();
    let hand = e1.eval(&[vec![1.5], vec![0.5]]).unwrap();

    let e2 = extend(v, DomainSpec::cube(2, 1.0, 3.0, Condition::A).unwrap(), 3).unwrap();
    let (gap1, mono1) = boundary_gap(|s| e1.eval(&[vec![1.5], vec![s]]).unwrap(), 1.0);
    let (gap2, mono2) = boundary_gap(|s| e2.eval(&[vec![2.0, 1.5], vec![s, 2.5], vec![0.0, 0.0]]).unwrap(), 1.0);
    // Negative control: dropping out-of-Ω points outright jumps at the boundary.
    let hard = |s: f64| {
        let pts = [vec![1.5], vec![s]];
        let w: Vec<SlotWeight> = pts
            .iter()
            .map(|x| {
                let inside = d1.contains(x);
                SlotWeight { include: if inside { 1.0 } else { 0.0 }, exclude: if inside { 0.0 } else { 1.0 }, forced: inside }
            })
            .collect();
        weighted_subset_sum(&w, |c| Ok(sum.eval(&c.iter().map(|&j| d1.lift(&pts[j])).collect::<Vec<_>>()))).unwrap()
    };
    let (control, _) = boundary_gap(hard, 1.0);
    let pass = pad_err <= 1e-12 && (hand - 2.0).abs() <= 1e-12 && gap1 < 1e-6 && gap2 < 1e-6 && mono1 && mono2 && control > 1e-3;
    outcome(
        pass,
        format!(
            "padding err {pad_err:.1e}; V̄(1.5,0.5) = {hand}; boundary gaps {gap1:.1e}, {gap2:.1e} (control {control:.2})"
        ),
    )
}

fn c5_psi() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut seed_gap = 0.0f64;
    for f in [BuiltinFunction::LogitCs, BuiltinFunction::PairwiseProduct] {
        for dim in 1..=2 {
            let d = DomainSpec::cube(dim, 0.0, 5.0, Condition::B).unwrap();
            let slots = 4;
            let psi = build_psi(f, d.clone(), slots, ReconstructConfig::with_seed(0)).unwrap();
            let other = build_psi(f, d.clone(), slots, ReconstructConfig::with_seed(99)).unwrap();
            for _ in 0..250 {
                let n = r.gen_range(1..=slots);
                let x: Vec<Vec<f64>> = (0..n).map(|_| d.sample(&mut r)).collect();
                let m = pool(&PointSet::new(dim, x.clone()).unwrap(), psi.basis()).unwrap();
                let want = f.eval(&x);
                let got = match psi.eval(&m) {
                    Ok(v) => v,
                    Err(e) => return outcome(false, format!("{}: {e}", f.name())),
                };
                worst = worst.max((got - want).abs() / (1.0 + want.abs()));
                seed_gap = seed_gap.max((got - other.eval(&m).unwrap()).abs());
            }
        }
    }
    outcome(
        worst <= 1e-6 && seed_gap <= 1e-8,
        format!("2 x 500 inputs, max relative error {worst:.1e}, seed gap {seed_gap:.1e}"),
    )
}

fn c6_conditional_nested() -> Outcome {
    let mut r = rng(6);
    let cond_v = |own: &[f64], comps: &[Vec<f64>], y: &[f64]| -> f64 {
        let s: f64 = comps.iter().map(|c| c.iter().product::<f64>()).sum();
        let m: f64 = comps.iter().map(|c| c[0]).fold(0.0, f64::max);
        own[0] * (y[0] + s) - m * own[own.len() - 1]
    };
    let mut worst_c = 0.0f64;
    for case in 0..200 {
        let dim = r.gen_range(1..=2);
        let slots = r.gen_range(2..=3);
        let (lo, cond) = if case % 2 == 0 { (0.0, Condition::B) } else { (0.2, Condition::A) };
        let d = DomainSpec::cube(dim, lo, 3.0, cond).unwrap();
        let psi = build_psi_conditional(cond_v, d.clone(), slots, 1, ReconstructConfig::with_seed(case)).unwrap();
        let n = r.gen_range(1..=slots);
        let x = PointSet::new(dim, (0..n).map(|_| d.sample(&mut r)).collect()).unwrap();
        let j = r.gen_range(0..n);
        let y = [r.gen_range(0.0..1.0)];
        let want = cond_v(&x.points()[j], x.without(j).unwrap().points(), &y);
        match psi.eval_points(&x, j, &y) {
            Ok(got) => worst_c = worst_c.max((got - want).abs() / (1.0 + want.abs())),
            Err(e) => return outcome(false, format!("conditional case {case}: {e}")),
        }
    }

    let nested_v = |own: &[Vec<f64>], rivals: &[Vec<Vec<f64>>], _y: &[f64]| -> f64 {
        let own_sum: f64 = own.iter().map(|x| x.iter().sum::<f64>()).sum();
        let rival: f64 = rivals.iter().map(|p| p.iter().map(|x| x[0]).fold(0.0, f64::max)).sum();
        own_sum * (1.0 + rival)
    };
    let mut worst_n = 0.0f64;
    for case in 0..200 {
        let dim = r.gen_range(1..=2);
        let products = r.gen_range(1..=3);
        let firms = r.gen_range(2..=3);
        let (lo, cond) = if case % 2 == 0 { (0.0, Condition::B) } else { (0.2, Condition::A) };
        let d = DomainSpec::cube(dim, lo, 3.0, cond).unwrap();
        let psi = build_nested_psi(nested_v, d.clone(), products, firms, 0, ReconstructConfig::with_seed(case)).unwrap();
        let present = r.gen_range(1..=firms);
        let ports: Vec<PointSet> = (0..present)
            .map(|_| {
                let n = r.gen_range(1..=products);
                PointSet::new(dim, (0..n).map(|_| d.sample(&mut r)).collect()).unwrap()
            })
            .collect();
        let f = r.gen_range(0..present);
        let rivals: Vec<Vec<Vec<f64>>> = ports
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .map(|(_, p)| p.points().to_vec())
            .collect();
        let want = nested_v(ports[f].points(), &rivals, &[]);
        match psi.eval_portfolios(&ports, f, &[]) {
            Ok(got) => worst_n = worst_n.max((got - want).abs() / (1.0 + want.abs())),
            Err(e) => return outcome(false, format!("nested case {case}: {e}")),
        }
    }
    outcome(
        worst_c <= 1e-6 && worst_n <= 1e-6,
        format!("200 + 200 instances, max relative error {worst_c:.1e} (conditional), {worst_n:.1e} (nested)"),
    )
}

fn c7_aggregative() -> Outcome {
    let cournot = match agg_check(cournot_payoff, 0, 3, 10, 0) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("cournot: {e}")),
    };
    let poly = match agg_check(PolynomialPayoff::random(7), 1, 3, 10, 7) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("polynomial: {e}")),
    };
    outcome(
        cournot.max_abs_deviation <= 1e-8 && poly.max_abs_deviation <= 1e-8,
        format!(
            "Cournot K={} on {} profiles: {:.1e}; polynomial K={}: {:.1e}",
            cournot.k, cournot.profiles, cournot.max_abs_deviation, poly.k, poly.max_abs_deviation
        ),
    )
}

fn markets(r: &mut ChaCha8Rng, sizes: &[usize], count: usize, rule: impl Fn(f64, &[f64]) -> f64) -> Vec<MarketSample> {
    let mut out = Vec::new();
    for &n in sizes {
        for _ in 0..count {
            let s: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..5.0)).collect();
            for j in 0..n {
                let comps: Vec<f64> = s.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect();
                out.push(MarketSample::new(
                    vec![s[j]],
                    comps.iter().map(|&c| vec![c]).collect(),
                    vec![],
                    rule(s[j], &comps),
                ));
            }
        }
    }
    out
}

fn c8_policy_fitting() -> Outcome {
    let mut r = rng(8);
    let nonlinear = |own: f64, c: &[f64]| {
        let m1: f64 = c.iter().sum();
        let m2: f64 = c.iter().map(|v| v * v).sum();
        2.0 + own - 0.4 * m1 + 0.1 * m2 + 0.3 * own * m1 - 0.05 * own * own
    };
    let train = markets(&mut r, &[2, 3], 15, nonlinear);
    let test = markets(&mut r, &[4], 15, nonlinear);
    let model = fit(&train, 2, 2, 0.0).unwrap();
    let err = test
        .iter()
        .map(|s| (model.predict(s).unwrap() - s.outcome).abs())
        .fold(0.0, f64::max);
    let sweep = k_sweep(&train, &[1, 2], 2, 0.0).unwrap();

    let linear = |own: f64, c: &[f64]| own + 2.0 * c.iter().sum::<f64>();
    let lin_model = fit(&markets(&mut r, &[2, 3], 10, linear), 1, 1, 0.0).unwrap();
    let states = vec![vec![1.0], vec![2.0], vec![3.0]];
    let merged = counterfactual_merge(&lin_model, &states, &[], (1, 2), sum_states).unwrap();
    let eleven = merged.after[0];
    outcome(
        err <= 1e-6 && sweep.len() == 2 && (eleven - 11.0).abs() <= 1e-8,
        format!(
            "size-4 max error {err:.1e}; K-sweep rmse {:.1e} (K=1), {:.1e} (K=2); merged prediction {eleven:.10}",
            sweep[0].training_rmse, sweep[1].training_rmse
        ),
    )
}

fn c9_mme() -> Outcome {
    let tol = 1e-9;
    let opts = SolverOptions {
        tol,
        max_iter: 100_000,
        ..SolverOptions::default()
    };
    let mut r = rng(9);
    let mut specs: Vec<GameSpec> = (0..6)
        .map(|_| GameSpec {
            firms: r.gen_range(2..=4),
            states: r.gen_range(2..=4),
            price_scale: r.gen_range(0.5..3.0),
            quality_slope: r.gen_range(0.2..1.0),
            invest_cost: r.gen_range(0.05..0.5),
            success_prob: r.gen_range(0.2..0.9),
            depreciation_prob: r.gen_range(0.05..0.4),
            discount: r.gen_range(0.5..0.95),
            choice_scale: r.gen_range(1.0..8.0),
        })
        .collect();
    specs.push(GameSpec {
        firms: 4,
        states: 4,
        discount: 0.95,
        ..GameSpec::default()
    });
    let mut worst = 0.0f64;
    for g in &specs {
        let cmp = match compare_mme_mpe(g, g.firms - 1, &opts) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("{g:?}: {e}")),
        };
        worst = worst.max(cmp.value_gap);
        let count = moment_state_count(g, g.firms - 1).unwrap();
        let law = binomial((g.states as usize + g.firms - 2) as u64, (g.firms - 1) as u64) as usize;
        if count != law || cmp.mme_competitor_states != law {
            return outcome(false, format!("moment-state count {count} != C(S+J-2, J-1) = {law}"));
        }
    }
    let mono = GameSpec {
        firms: 1,
        states: 4,
        ..GameSpec::default()
    };
    let m = compare_mme_mpe(&mono, 1, &opts).unwrap();
    outcome(
        worst <= 2.0 * tol && m.value_gap == 0.0 && m.policy_gap == 0.0,
        format!(
            "{} games, max value gap {worst:.1e} (bound {:.0e}); monopoly gaps {}, {}",
            specs.len(),
            2.0 * tol,
            m.value_gap,
            m.policy_gap
        ),
    )
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_moment-rep"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout)
}

fn c10_cli() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let pts = dir.path().join("pts.csv");
    let (m_s, pts_s) = (m.to_str().unwrap(), pts.to_str().unwrap());
    let mut notes = Vec::new();
    let mut ok = true;

    let (c1, _) = cli(&["features", "--I", "2", "--J", "3", "--points", "1,2;3,4;2,0.5", "--out", m_s]);
    let (c2, _) = cli(&["reconstruct", "--input", m_s, "--out", pts_s]);
    let (c3, again) = cli(&["features", "--I", "2", "--J", "3", "--points-file", pts_s]);
    if [c1, c2, c3] != [Some(0); 3] {
        ok = false;
        notes.push("round-trip commands failed".to_string());
    } else {
        let a: Value = serde_json::from_str(&std::fs::read_to_string(&m).unwrap()).unwrap();
        let b: Value = serde_json::from_slice(&again).unwrap();
        let err = a["values"]
            .as_array()
            .unwrap()
            .iter()
            .zip(b["values"].as_array().unwrap())
            .map(|(x, y)| (x.as_f64().unwrap() - y.as_f64().unwrap()).abs())
            .fold(0.0, f64::max);
        ok &= err <= 1e-6;
        notes.push(format!("round-trip err {err:.1e}"));
    }

    let model = dir.path().join("model.json");
    let expected: [(&str, Vec<String>, i32); 5] = [
        ("off-image", vec!["reconstruct".into(), "--input".into(), data("off_image.json").display().to_string()], 2),
        ("malformed csv", vec!["fit".into(), "--data".into(), data("malformed.csv").display().to_string(), "--K".into(), "1".into(), "--out".into(), model.display().to_string()], 1),
        ("unknown flag", vec!["features".into(), "--nope".into()], 1),
        ("valid fit", vec!["fit".into(), "--data".into(), data("markets.csv").display().to_string(), "--K".into(), "1".into(), "--out".into(), model.display().to_string()], 0),
        ("help", vec!["--help".into()], 0),
    ];
    for (name, args, code) in expected {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (got, _) = cli(&args);
        if got != Some(code) {
            ok = false;
            notes.push(format!("{name}: exit {got:?}, expected {code}"));
        }
    }
    let (code, out) = cli(&["mme", "--spec", data("monopoly.json").to_str().unwrap(), "--K", "1"]);
    let v: Value = serde_json::from_slice(&out).unwrap_or(Value::Null);
    let zero = v["comparison"]["value_gap"] == 0.0 && v["comparison"]["policy_gap"] == 0.0;
    ok &= code == Some(0) && zero;
    notes.push(format!("exit codes checked; monopoly gaps zero: {zero}"));
    outcome(ok, notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("kappa count law", c1_kappa, Some(Duration::from_secs(1))),
        ("reconstruction round-trip", c2_roundtrip, Some(Duration::from_secs(30))),
        ("Newton identities and roots", c3_newton, Some(Duration::from_secs(1))),
        ("extension padding and continuity", c4_extension, None),
        ("psi exactness", c5_psi, Some(Duration::from_secs(60))),
        ("conditional and nested psi", c6_conditional_nested, None),
        ("aggregative decomposition", c7_aggregative, None),
        ("cross-size policy fitting", c8_policy_fitting, None),
        ("MME equals MPE", c9_mme, Some(Duration::from_secs(300))),
        ("CLI round-trip and exit codes", c10_cli, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map(|l| format!(" / {}s", l.as_secs())).unwrap_or_default();
        println!(
            "{} {:>2} {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
