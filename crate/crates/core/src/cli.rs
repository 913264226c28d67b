//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input or usage, 2 for numerical
//! failures such as off-image moments or a non-converging solver.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::approx::{self, FittedModel, MarketSample};
use crate::error::{Error, Result};
use crate::extension::{Condition, DomainSpec};
use crate::games::{self, GameSpec, SolverOptions};
use crate::moment_core::{pool, MomentBasis, MomentVector, PointSet};
use crate::par::{self, Execution};
use crate::reconstruct::{reconstruct, ReconstructConfig};
use crate::represent::{aggregative_decompose, build_psi, BuiltinFunction, RivalPayoff};
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(name = "moment-rep", version, about = "Moment representations of symmetric functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CondArg {
    A,
    B,
}

impl From<CondArg> for Condition {
    fn from(c: CondArg) -> Self {
        match c {
            CondArg::A => Condition::A,
            CondArg::B => Condition::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FunctionArg {
    #[value(name = "logit_cs")]
    LogitCs,
    #[value(name = "pairwise_product")]
    PairwiseProduct,
    Cournot,
}

impl From<FunctionArg> for BuiltinFunction {
    fn from(f: FunctionArg) -> Self {
        match f {
            FunctionArg::LogitCs => BuiltinFunction::LogitCs,
            FunctionArg::PairwiseProduct => BuiltinFunction::PairwiseProduct,
            FunctionArg::Cournot => BuiltinFunction::Cournot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PayoffArg {
    Cournot,
    Polynomial,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pool a point set into its moment vector.
    ///
    /// Points are given as comma-separated coordinates, either flat (chunked
    /// by I) or with points separated by ';'. A points file is a CSV with one
    /// point per row, no header; lines starting with '#' are skipped.
    Features(FeaturesArgs),
    /// Recover the sorted, zero-padded point matrix from a moment JSON file.
    ///
    /// The input is the JSON written by `features` (fields I, J, values).
    /// CSV output has one point per row, preceded by '#' comment lines.
    Reconstruct(ReconstructArgs),
    /// Check the exact aggregator of a built-in symmetric function on random inputs.
    PsiCheck(PsiCheckArgs),
    /// Fit a moment-feature ridge regression to a market CSV.
    ///
    /// CSV columns: market_id, firm_id, s_1..s_I, y_1..y_C, outcome.
    /// Competitors are the other firms with the same market_id.
    Fit(FitArgs),
    /// Predict outcomes for every firm in a market CSV (outcome column optional).
    Predict(PredictArgs),
    /// Predict every firm with and without a merger of two firms in one market.
    MergeSim(MergeArgs),
    /// Solve a dynamic oligopoly on full and moment states and compare.
    ///
    /// The spec JSON has fields J, S, price_scale, quality_slope,
    /// invest_cost, success_prob, depreciation_prob, discount, choice_scale.
    Mme(MmeArgs),
    /// Check the aggregative decomposition of a symmetric game on an action grid.
    AggCheck(AggArgs),
}

#[derive(Debug, clap::Args, Serialize)]
struct FeaturesArgs {
    #[arg(long = "I")]
    #[serde(rename = "I")]
    dim: usize,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    degree: usize,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "points_file")]
    points: Option<String>,
    #[arg(long)]
    points_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct ReconstructArgs {
    /// Moment JSON file, or '-' for standard input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct PsiCheckArgs {
    #[arg(long, value_enum)]
    function: FunctionArg,
    #[arg(long = "I", default_value_t = 1)]
    #[serde(rename = "I")]
    dim: usize,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    slots: usize,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, value_enum, default_value_t = CondArg::B)]
    condition: CondArg,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: usize,
    #[arg(long = "D", default_value_t = 1)]
    #[serde(rename = "D")]
    d: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Where to write the model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also report training error for each K in this comma-separated list.
    #[arg(long, value_delimiter = ',')]
    k_sweep: Vec<usize>,
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct MergeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    market: String,
    /// Two firm_id values, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    merge: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct MmeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    k: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    /// Write a CSV of moment-state counts and gaps for K = 1..=J−1.
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
struct AggArgs {
    #[arg(long, value_enum)]
    payoff: PayoffArg,
    #[arg(long = "J", default_value_t = 3)]
    #[serde(rename = "J")]
    players: usize,
    /// Grid points per player on [0, 1].
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Features(a) => features(a, out),
        Command::Reconstruct(a) => reconstruct_cmd(a, out),
        Command::PsiCheck(a) => psi_check_cmd(a, out),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Predict(a) => predict_cmd(a, out),
        Command::MergeSim(a) => merge_cmd(a, out),
        Command::Mme(a) => mme_cmd(a, out),
        Command::AggCheck(a) => agg_cmd(a, out),
    }
}

fn report(command: &str, config: &impl Serialize, body: Value) -> Result<Value> {
    let mut v = json!({
        "version": VERSION,
        "command": command,
        "config": serde_json::to_value(config)?,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    Ok(v)
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(v: &Value, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    emit(&text, path, out)
}

fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .map_err(|_| Error::invalid(format!("not a number: {t:?}")))
}

/// `"1,2;3,4"` (points separated by ';') or a flat list chunked by `dim`.
fn parse_points(dim: usize, text: &str) -> Result<PointSet> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(PointSet::empty(dim));
    }
    if text.contains(';') {
        let points = text
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.split(',').map(parse_number).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        PointSet::new(dim, points)
    } else {
        let flat = text.split(',').map(parse_number).collect::<Result<Vec<_>>>()?;
        PointSet::from_flat(dim, &flat)
    }
}

fn read_points_csv(dim: usize, path: &Path) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record?;
        points.push(record.iter().map(parse_number).collect::<Result<Vec<_>>>()?);
    }
    PointSet::new(dim, points)
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize)]
struct MomentFile {
    #[serde(rename = "I")]
    dim: usize,
    #[serde(rename = "J")]
    degree: usize,
    values: Vec<f64>,
}

fn moment_body(m: &MomentVector) -> Value {
    let basis: Vec<&[u32]> = m.basis().indices().iter().map(|s| s.exponents()).collect();
    json!({
        "I": m.basis().dim(),
        "J": m.basis().degree(),
        "basis": basis,
        "values": m.values(),
    })
}

fn features(a: FeaturesArgs, out: &mut dyn Write) -> Result<()> {
    let points = match (&a.points, &a.points_file) {
        (Some(text), None) => parse_points(a.dim, text)?,
        (None, Some(path)) => read_points_csv(a.dim, path)?,
        _ => return Err(Error::invalid("give exactly one of --points or --points-file")),
    };
    let basis = Arc::new(MomentBasis::new(a.dim, a.degree)?);
    let m = pool(&points, &basis)?;
    let v = report("features", &a, moment_body(&m))?;
    emit_json(&v, a.out.as_deref(), out)
}

fn reconstruct_cmd(a: ReconstructArgs, out: &mut dyn Write) -> Result<()> {
    let file: MomentFile = serde_json::from_str(&read_input(&a.input)?)?;
    let basis = Arc::new(MomentBasis::new(file.dim, file.degree)?);
    let m = MomentVector::new(basis, file.values)?;
    let cfg = ReconstructConfig::with_seed(a.seed);
    let rep = reconstruct(&m, &cfg)?;
    match a.format {
        Format::Json => {
            let v = report(
                "reconstruct",
                &a,
                json!({
                    "reconstruct_config": cfg,
                    "columns": rep.matrix.columns(),
                    "residual": rep.residual,
                    "retries": rep.retries,
                }),
            )?;
            emit_json(&v, a.out.as_deref(), out)
        }
        Format::Csv => {
            let mut text = format!(
                "# moment-rep {VERSION} reconstruct seed={} I={} J={}\n# residual={:e} retries={}\n",
                a.seed, file.dim, file.degree, rep.residual, rep.retries
            );
            for col in rep.matrix.columns() {
                let row: Vec<String> = col.iter().map(|v| format_number(*v)).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            emit(&text, a.out.as_deref(), out)
        }
    }
}

/// Shortest representation that parses back to the same value.
fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Outcome of [`psi_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiCheckReport {
    pub samples: usize,
    /// `max |ψ(pool(X)) − V(X)|`.
    pub max_abs_deviation: f64,
    /// `max |ψ(pool(X)) − V(X)| / (1 + |V(X)|)`.
    pub max_rel_deviation: f64,
    /// `max |ψ_seed − ψ_{seed+1}|` over the same inputs.
    pub seed_deviation: f64,
}

/// Evaluate the exact aggregator of `f` on `samples` random point sets of
/// size `1..=slots` drawn from `domain`.
pub fn psi_check(
    f: BuiltinFunction,
    domain: &DomainSpec,
    slots: usize,
    samples: usize,
    seed: u64,
) -> Result<PsiCheckReport> {
    let psi = build_psi(f, domain.clone(), slots, ReconstructConfig::with_seed(seed))?;
    let other = build_psi(f, domain.clone(), slots, ReconstructConfig::with_seed(seed.wrapping_add(1)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = (0..samples)
        .map(|_| {
            let n = rng.gen_range(1..=slots);
            PointSet::new(domain.dim(), (0..n).map(|_| domain.sample(&mut rng)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = par::try_map(Execution::default(), &sets, |x| -> Result<(f64, f64, f64)> {
        let m = pool(x, psi.basis())?;
        let direct = f.eval(x.points());
        let a = psi.eval(&m)?;
        let b = other.eval(&m)?;
        Ok(((a - direct).abs(), (a - direct).abs() / (1.0 + direct.abs()), (a - b).abs()))
    })?;
    let max = |i: usize| {
        rows.iter()
            .map(|r| [r.0, r.1, r.2][i])
            .fold(0.0f64, f64::max)
    };
    Ok(PsiCheckReport {
        samples,
        max_abs_deviation: max(0),
        max_rel_deviation: max(1),
        seed_deviation: max(2),
    })
}

fn psi_check_cmd(a: PsiCheckArgs, out: &mut dyn Write) -> Result<()> {
    let domain = DomainSpec::cube(a.dim, a.lo, a.hi, a.condition.into())?;
    let rep = psi_check(a.function.into(), &domain, a.slots, a.samples, a.seed)?;
    let v = report("psi-check", &a, serde_json::to_value(rep)?)?;
    emit_json(&v, a.out.as_deref(), out)
}

fn fit_cmd(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let samples = approx::read_csv_path(&a.data)?;
    let model = approx::fit(&samples, a.k, a.d, a.lambda)?;
    fs::write(&a.out, model.to_json()? + "\n")?;
    let sweep = if a.k_sweep.is_empty() {
        Vec::new()
    } else {
        approx::k_sweep(&samples, &a.k_sweep, a.d, a.lambda)?
    };
    if let Some(path) = &a.sweep_csv {
        let mut w = csv::Writer::from_path(path)?;
        for row in &sweep {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let v = report(
        "fit",
        &a,
        json!({
            "samples": samples.len(),
            "features": model.coefficients.len() + 1,
            "rank": model.rank,
            "rank_deficient": model.rank_deficient,
            "training_rmse": model.training_rmse,
            "raw_coefficients": model.raw_coefficients(),
            "k_sweep": sweep,
        }),
    )?;
    emit_json(&v, None, out)
}

fn load_model(path: &Path) -> Result<FittedModel> {
    FittedModel::from_json(&fs::read_to_string(path)?)
}

fn predict_cmd(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let samples = approx::read_csv_path(&a.data)?;
    let preds = model.predict_batch(&samples, Execution::default())?;
    match a.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["market_id", "firm_id", "prediction"])?;
            for (s, p) in samples.iter().zip(&preds) {
                w.write_record([s.market_id.as_str(), s.firm_id.as_str(), &format_number(*p)])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            let text = format!("# moment-rep {VERSION} predict model={}\n", a.model.display())
                + &String::from_utf8_lossy(&bytes);
            emit(&text, a.out.as_deref(), out)
        }
        Format::Json => {
            let rows: Vec<Value> = samples
                .iter()
                .zip(&preds)
                .map(|(s, p)| json!({"market_id": s.market_id, "firm_id": s.firm_id, "prediction": p}))
                .collect();
            let v = report("predict", &a, json!({ "predictions": rows }))?;
            emit_json(&v, a.out.as_deref(), out)
        }
    }
}

fn merge_cmd(a: MergeArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let samples = approx::read_csv_path(&a.data)?;
    let market: Vec<&MarketSample> = samples.iter().filter(|s| s.market_id == a.market).collect();
    if market.is_empty() {
        return Err(Error::invalid(format!("market {:?} not found", a.market)));
    }
    if a.merge.len() != 2 {
        return Err(Error::invalid("--merge takes exactly two firm ids"));
    }
    let find = |id: &str| {
        market
            .iter()
            .position(|s| s.firm_id == id)
            .ok_or_else(|| Error::invalid(format!("firm {id:?} not in market {:?}", a.market)))
    };
    let (i, j) = (find(&a.merge[0])?, find(&a.merge[1])?);
    let states: Vec<Vec<f64>> = market.iter().map(|s| s.own.clone()).collect();
    let res = approx::counterfactual_merge(&model, &states, &market[0].y, (i, j), approx::sum_states)?;
    let (lo, hi) = (i.min(j), i.max(j));
    let merged_id = format!("{}+{}", market[lo].firm_id, market[hi].firm_id);
    let before: Vec<Value> = market
        .iter()
        .zip(&res.before)
        .map(|(s, p)| json!({"firm_id": s.firm_id, "prediction": p}))
        .collect();
    let after_ids: Vec<String> = market
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != hi)
        .map(|(k, s)| if k == lo { merged_id.clone() } else { s.firm_id.clone() })
        .collect();
    let after: Vec<Value> = after_ids
        .iter()
        .zip(&res.after)
        .map(|(id, p)| json!({"firm_id": id, "prediction": p}))
        .collect();
    let v = report(
        "merge-sim",
        &a,
        json!({
            "combine": "sum",
            "merged_state": res.merged_state,
            "before": before,
            "after": after,
        }),
    )?;
    emit_json(&v, a.out.as_deref(), out)
}

fn mme_cmd(a: MmeArgs, out: &mut dyn Write) -> Result<()> {
    let spec = GameSpec::from_json(&fs::read_to_string(&a.spec)?)?;
    let opts = SolverOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        ..SolverOptions::default()
    };
    let mpe = games::solve_mpe_with(&spec, &opts)?;
    let mme = games::solve_mme_with(&spec, a.k, &opts)?;
    let cmp = games::compare_solutions(&mpe, &mme)?;

    let mut sweep = Vec::new();
    for k in 1..spec.firms.max(2) {
        let sol = if k == a.k {
            mme.clone()
        } else {
            games::solve_mme_with(&spec, k, &opts)?
        };
        let c = games::compare_solutions(&mpe, &sol)?;
        sweep.push(json!({
            "K": k,
            "moment_states": c.mme_competitor_states,
            "total_states": c.mme_states,
            "value_gap": c.value_gap,
            "policy_gap": c.policy_gap,
        }));
    }
    if let Some(path) = &a.sweep_csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["K", "moment_states", "total_states", "value_gap", "policy_gap"])?;
        for row in &sweep {
            w.write_record([
                row["K"].to_string(),
                row["moment_states"].to_string(),
                row["total_states"].to_string(),
                row["value_gap"].to_string(),
                row["policy_gap"].to_string(),
            ])?;
        }
        w.flush()?;
    }
    let v = report(
        "mme",
        &a,
        json!({
            "game": spec,
            "comparison": cmp,
            "k_sweep": sweep,
            "mpe": {"states": mpe.states, "values": mpe.values, "policies": mpe.policies,
                    "iterations": mpe.iterations, "residual": mpe.residual},
            "mme": {"states": mme.states, "values": mme.values, "policies": mme.policies,
                    "iterations": mme.iterations, "residual": mme.residual},
        }),
    )?;
    emit_json(&v, a.out.as_deref(), out)
}

/// Cournot payoff `a (1 − a − Σ a_r)`.
pub fn cournot_payoff(own: &[f64], rivals: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let q: f64 = rivals.iter().map(|r| r.0[0]).sum();
    own[0] * (1.0 - own[0] - q)
}

/// A polynomial payoff in own action `a`, rival actions `a_r` and rival
/// scalar types `t_r`:
/// `c0 a + c1 a² + c2 a Σ a_r t_r + c3 (Σ a_r)² + c4 Σ t_r a_r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolynomialPayoff {
    pub coef: [f64; 5],
}

impl PolynomialPayoff {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coef = [0.0; 5];
        for c in &mut coef {
            *c = rng.gen_range(-1.0..1.0);
        }
        PolynomialPayoff { coef }
    }
}

impl RivalPayoff for PolynomialPayoff {
    fn eval(&self, own: &[f64], rivals: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let a = own[0];
        let c = &self.coef;
        let sa: f64 = rivals.iter().map(|r| r.0[0]).sum();
        let sat: f64 = rivals.iter().map(|r| r.0[0] * r.1[0]).sum();
        let sta2: f64 = rivals.iter().map(|r| r.1[0] * r.0[0] * r.0[0]).sum();
        c[0] * a + c[1] * a * a + c[2] * a * sat + c[3] * sa * sa + c[4] * sta2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggCheckReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub profiles: usize,
    pub evaluations: usize,
    pub max_abs_deviation: f64,
}

/// Compare `g̃_j(a_j, Σ h)` with `g_j(a)` for every player at every profile of
/// a `grid`-point action grid on `[0, 1]`. Types are drawn from `seed` when
/// `type_dim > 0`.
pub fn agg_check<G: RivalPayoff>(
    payoff: G,
    type_dim: usize,
    players: usize,
    grid: usize,
    seed: u64,
) -> Result<AggCheckReport> {
    if grid < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    let profiles = grid
        .checked_pow(players as u32)
        .filter(|&n| n <= 1_000_000)
        .ok_or_else(|| Error::invalid("action grid too large"))?;
    let domain = DomainSpec::cube(1 + type_dim, 0.0, 1.0, Condition::B)?;
    let form = aggregative_decompose(payoff, domain, 1, type_dim, players, ReconstructConfig::with_seed(seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types: Vec<Vec<f64>> = (0..players)
        .map(|_| (0..type_dim).map(|_| rng.gen_range(0.1..1.0)).collect())
        .collect();
    let payoff = &form;
    let devs = par::try_map_range(Execution::default(), profiles, |idx| -> Result<f64> {
        let mut rest = idx;
        let profile: Vec<(Vec<f64>, Vec<f64>)> = (0..players)
            .map(|p| {
                let a = (rest % grid) as f64 / (grid - 1) as f64;
                rest /= grid;
                (vec![a], types[p].clone())
            })
            .collect();
        let mut worst = 0.0f64;
        for j in 0..players {
            let rivals: Vec<(Vec<f64>, Vec<f64>)> = profile
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, r)| r.clone())
                .collect();
            let direct = payoff.direct(&profile[j].0, &rivals);
            let via = payoff.payoff_via_aggregate(&profile, j)?;
            worst = worst.max((direct - via).abs());
        }
        Ok(worst)
    })?;
    Ok(AggCheckReport {
        k: form.k(),
        profiles,
        evaluations: profiles * players,
        max_abs_deviation: devs.into_iter().fold(0.0, f64::max),
    })
}

fn agg_cmd(a: AggArgs, out: &mut dyn Write) -> Result<()> {
    let rep = match a.payoff {
        PayoffArg::Cournot => agg_check(cournot_payoff, 0, a.players, a.grid, a.seed)?,
        PayoffArg::Polynomial => agg_check(PolynomialPayoff::random(a.seed), 1, a.players, a.grid, a.seed)?,
    };
    let v = report("agg-check", &a, serde_json::to_value(rep)?)?;
    emit_json(&v, a.out.as_deref(), out)
}
