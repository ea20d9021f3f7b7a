//! Command-line front end: `range`, `sweep`, `clone3`, `nonlocal`, `verify`.
//!
//! Every command builds a [`ReportEnvelope`] and renders it as an aligned
//! table, JSON or CSV. Exit codes: 0 success, 1 invariant failure or
//! disagreement, 2 usage or domain error, 3 I/O error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::broadcast::{
    closed_form_nonlocal_3, default_alpha_grid, default_eta_grid, linspace,
    numeric_alpha_range, run_broadcast, sweep_with, ClosedForms, SweepRow,
};
use crate::cloners::{
    build_general_cloner, build_gisin_massar_3, build_simple_cloner, check_simple_constraints,
    measured_reduction_factor, probe_states, Ancillas, BuiltCloner, SearchConfig, DEFAULT_SEED,
    ETA_13, ISOTROPY_TOL,
};
use crate::error::Error;
use crate::linalg::{hermitian_eigenvalues, FactorShape, ALGEBRAIC_TOL};
use crate::separability::{
    inseparable_alpha_range, local_separable_alpha_range, max_entangled_copies, nonlocal_cloning_range,
    nonlocal_scaling, ppt_verdict, AlphaRange, ScalingVerdict, Verdict, DEFAULT_PPT_TOL,
};
use crate::states::{fidelity_pure, fit_scaled_form, phi_plus, DensityOperator, EntangledInput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const CSV_HEADER: &str =
    "eta,alpha_sq,nonlocal_verdict,local_verdict,min_pt_eigenvalue,analytic_nonlocal_inseparable,analytic_local_separable";

/// Bisection width used by `range --numeric` and the verify suite.
const BISECTION_TOL: f64 = 1e-7;

#[derive(Parser, Debug)]
#[command(name = "qbroadcast", version, about = "Entanglement broadcasting with local quantum cloners")]
pub struct Cli {
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed of the general-cloner search
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Fixed report timestamp (ISO-8601); defaults to the current UTC time
    #[arg(long, global = true)]
    pub timestamp: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// alpha² ranges of the nonlocal inseparable and local separable pairs
    Range {
        /// Reduction factor of the local cloners
        #[arg(long, allow_negative_numbers = true)]
        eta: f64,
        /// Also bisect the partial-transpose verdict of the constructed cloner
        #[arg(long)]
        numeric: bool,
    },
    /// Broadcast over an (eta, alpha²) grid and cross-check the closed forms
    Sweep {
        /// Comma-separated eta values [default: 9 points on 0.58..2/3]
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eta_grid: Option<Vec<f64>>,
        /// Comma-separated alpha² values [default: 101 points on 0..1]
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        alpha_grid: Option<Vec<f64>>,
    },
    /// Broadcast with the optimal 1→3 cloner
    Clone3 {
        #[arg(long, allow_negative_numbers = true)]
        alpha_sq: f64,
    },
    /// Separability of M-copy nonlocal cloner outputs
    Nonlocal {
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
        max_m: u32,
    },
    /// Run the full invariant suite
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub rows: Vec<Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, Value>,
    pub tool_version: String,
    pub timestamp: String,
}

impl ReportEnvelope {
    fn new(command: &str, timestamp: &str) -> Self {
        Self {
            command: command.into(),
            parameters: BTreeMap::new(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: timestamp.into(),
        }
    }

    fn param(mut self, name: &str, value: impl Serialize) -> Self {
        self.parameters.insert(name.into(), to_value(value));
        self
    }

    fn row(&mut self, value: impl Serialize) {
        self.rows.push(to_value(value));
    }

    fn summarize(&mut self, name: &str, value: impl Serialize) {
        self.summary.insert(name.into(), to_value(value));
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).expect("report values serialize")
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. }
        | Error::NotIsometric(_)
        | Error::NonIsotropic(_)
        | Error::Infeasible { .. }
        | Error::NotPositive(_)
        | Error::NotHermitian(_)
        | Error::InvalidTrace(_)
        | Error::NotNormalized(_) => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

/// Formats `x` with 7 significant digits.
pub fn sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..7).contains(&exp) {
        format!("{:.*}", (6 - exp).max(0) as usize, x)
    } else {
        format!("{x:.6e}")
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Number(n) if n.is_f64() => n.as_f64().map(sig7).unwrap_or_default(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn scalar_columns(rows: &[Value]) -> Vec<String> {
    match rows.first() {
        Some(Value::Object(m)) => m
            .iter()
            .filter(|(_, v)| !v.is_array() && !v.is_object())
            .map(|(k, _)| k.clone())
            .collect(),
        _ => Vec::new(),
    }
}

/// Aligned plain-text table of the scalar fields of `rows`.
pub fn render_table(rows: &[Value]) -> String {
    let cols = scalar_columns(rows);
    if cols.is_empty() {
        return String::new();
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| cell(r.get(c).unwrap_or(&Value::Null))).collect())
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| body.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let numeric: Vec<bool> = cols.iter().map(|c| rows[0].get(c).is_some_and(Value::is_number)).collect();
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .zip(&numeric)
            .map(|((s, w), num)| if *num { format!("{s:>w$}") } else { format!("{s:<w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&cols);
    out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in &body {
        out += &line(r);
    }
    out
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// CSV of the rows; nested values are embedded as JSON text.
pub fn render_csv(rows: &[Value]) -> Result<String, csv::Error> {
    let cols: Vec<String> = match rows.first() {
        Some(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    if !cols.is_empty() {
        w.write_record(&cols)?;
    }
    for r in rows {
        w.write_record(cols.iter().map(|c| csv_field(r.get(c).unwrap_or(&Value::Null))))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

#[derive(Debug, Serialize)]
struct SweepCsvRow {
    eta: f64,
    alpha_sq: f64,
    nonlocal_verdict: Option<Verdict>,
    local_verdict: Option<Verdict>,
    min_pt_eigenvalue: Option<f64>,
    analytic_nonlocal_inseparable: Option<bool>,
    analytic_local_separable: Option<bool>,
}

impl From<&SweepRow> for SweepCsvRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            eta: r.eta,
            alpha_sq: r.alpha_sq,
            nonlocal_verdict: r.nonlocal_verdict,
            local_verdict: r.local_verdict,
            min_pt_eigenvalue: r.min_pt_eigenvalue,
            analytic_nonlocal_inseparable: r.analytic_nonlocal_inseparable,
            analytic_local_separable: r.analytic_local_separable,
        }
    }
}

/// The fixed seven-column sweep CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(SweepCsvRow::from(r))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

/// What a command produced, before rendering.
struct Outcome {
    envelope: ReportEnvelope,
    /// Lines printed above the table.
    heading: Vec<String>,
    /// Lines printed below the table.
    footer: Vec<String>,
    csv: Option<String>,
    status: i32,
    diagnostics: Vec<String>,
}

impl Outcome {
    fn new(envelope: ReportEnvelope) -> Self {
        Self {
            envelope,
            heading: Vec::new(),
            footer: Vec::new(),
            csv: None,
            status: EXIT_OK,
            diagnostics: Vec::new(),
        }
    }

    fn render(&self, format: Format) -> Result<String, csv::Error> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(&self.envelope).expect("json") + "\n",
            Format::Csv => match &self.csv {
                Some(s) => s.clone(),
                None => render_csv(&self.envelope.rows)?,
            },
            Format::Table => {
                let mut s = String::new();
                for l in &self.heading {
                    s += l;
                    s.push('\n');
                }
                s += &render_table(&self.envelope.rows);
                for l in &self.footer {
                    s += l;
                    s.push('\n');
                }
                s
            }
        })
    }
}

fn describe(range: &AlphaRange) -> String {
    match range.bounds {
        None => "empty".into(),
        Some((lo, hi)) if lo == hi => format!("{{{}}}", sig7(lo)),
        Some((lo, hi)) => format!("[{}, {}]", sig7(lo), sig7(hi)),
    }
}

fn range_row(name: &str, range: &AlphaRange) -> Value {
    json!({
        "range": name,
        "empty": range.is_empty(),
        "lo": range.lo(),
        "hi": range.hi(),
        "width": range.width(),
        "note": range.note,
    })
}

fn cmd_range(eta: f64, numeric: bool, ts: &str) -> crate::Result<Outcome> {
    let nonlocal = inseparable_alpha_range(eta)?;
    let local = local_separable_alpha_range(eta)?;
    let mut env = ReportEnvelope::new("range", ts).param("eta", eta);
    env.rows.push(range_row("nonlocal_inseparable", &nonlocal));
    env.rows.push(range_row("local_separable", &local));
    let mut heading = vec![
        format!("eta = {}", sig7(eta)),
        format!("nonlocal inseparable: {}", describe(&nonlocal)),
        format!("local separable:      {}", describe(&local)),
    ];
    if numeric {
        let cloner = build_simple_cloner(eta)?.isometry;
        let found = numeric_alpha_range(&cloner, BISECTION_TOL)?;
        heading.push(format!("numeric inseparable:  {}", describe(&found)));
        env.rows.push(range_row("numeric_inseparable", &found));
    }
    let mut out = Outcome::new(env);
    out.heading = heading;
    Ok(out)
}

fn check_grids(eta_grid: &[f64], alpha_grid: &[f64]) -> crate::Result<()> {
    for &eta in eta_grid {
        if !(eta > 0.0 && eta <= 2.0 / 3.0) {
            return Err(Error::Domain {
                name: "eta",
                value: eta,
                domain: "(0, 2/3]",
            });
        }
    }
    for &a in alpha_grid {
        EntangledInput::new(a)?;
    }
    if eta_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidShape("grids must be non-empty".into()));
    }
    Ok(())
}

fn cmd_sweep(eta_grid: Vec<f64>, alpha_grid: Vec<f64>, ts: &str) -> crate::Result<Outcome> {
    check_grids(&eta_grid, &alpha_grid)?;
    let rows = sweep_with(&eta_grid, &alpha_grid, &ClosedForms::default());
    let bad = rows.iter().filter(|r| r.disagreement).count();
    let mut env = ReportEnvelope::new("sweep", ts)
        .param("eta_grid", &eta_grid)
        .param("alpha_grid", &alpha_grid);
    for r in &rows {
        env.row(r);
    }
    env.summarize("rows", rows.len());
    env.summarize("disagreements", bad);
    let mut out = Outcome::new(env);
    out.csv = Some(sweep_csv(&rows).map_err(|e| Error::InvalidShape(e.to_string()))?);
    out.footer.push(format!("{} rows, {bad} disagreements", rows.len()));
    if bad > 0 {
        out.status = EXIT_INVARIANT;
        out.diagnostics.push(format!("sweep: {bad} disagreement rows"));
    }
    Ok(out)
}

fn cmd_clone3(alpha_sq: f64, ts: &str) -> crate::Result<Outcome> {
    let input = EntangledInput::new(alpha_sq)?;
    let cloner = build_gisin_massar_3()?.isometry;
    let result = run_broadcast(&input, &cloner)?;
    let pair = result.nonlocal();
    let report = ppt_verdict(pair, DEFAULT_PPT_TOL)?;
    let fit = fit_scaled_form(pair, &phi_plus())?;
    let expected = closed_form_nonlocal_3(&input)?;
    let deviation = result
        .nonlocal_pairs
        .iter()
        .map(|p| p.state.max_abs_diff(&expected))
        .collect::<crate::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let m = pair.matrix();
    let matrix: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| (0..4).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();

    let mut env = ReportEnvelope::new("clone3", ts).param("alpha_sq", alpha_sq);
    env.row(json!({
        "alpha_sq": alpha_sq,
        "verdict": report.verdict,
        "min_pt_eigenvalue": report.min_eigenvalue,
        "s": fit.s,
        "scaled_form_residual": fit.residual,
        "coherence": m[(0, 3)].re,
        "closed_form_deviation": deviation,
        "matrix": matrix,
    }));
    let mut out = Outcome::new(env);
    out.heading.push(format!("1→3 nonlocal pair at alpha² = {}", sig7(alpha_sq)));
    for i in 0..4 {
        let cells: Vec<String> = (0..4).map(|j| format!("{:>10}", sig7(m[(i, j)].re))).collect();
        out.heading.push(cells.join(" "));
    }
    if deviation > ALGEBRAIC_TOL {
        out.status = EXIT_INVARIANT;
        out.diagnostics
            .push(format!("clone3: pipeline deviates from closed form by {deviation:e}"));
    }
    Ok(out)
}

fn cmd_nonlocal(max_m: u32, ts: &str) -> crate::Result<Outcome> {
    let mut env = ReportEnvelope::new("nonlocal", ts).param("max_m", max_m);
    for m in 1..=max_m {
        env.row(nonlocal_scaling(m)?);
    }
    let best = max_entangled_copies();
    let range = nonlocal_cloning_range();
    env.summarize("max_entangled_copies", best);
    env.summarize("nonlocal_cloning_range", range.bounds);
    let mut out = Outcome::new(env);
    out.footer.push(format!("max entangled copies: {best}"));
    out.footer.push(format!("nonlocal cloning range: {}", describe(&range)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }

    pub fn passed(&self) -> bool {
        self.failed().is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Inputs of the verify suite. `forms` are the closed forms the broadcast
/// pipeline is compared against.
#[derive(Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub forms: ClosedForms,
    pub eta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Coefficients `(a², c²)` of the general cloner searched for.
    pub general: (f64, f64),
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            forms: ClosedForms::default(),
            eta_grid: default_eta_grid(),
            alpha_grid: default_alpha_grid(),
            general: (0.6, 0.05),
        }
    }
}

type Check = std::result::Result<String, String>;

fn outcome(name: &str, r: crate::Result<Check>) -> CheckResult {
    let (status, detail) = match r {
        Ok(Ok(d)) => (CheckStatus::Pass, d),
        Ok(Err(d)) => (CheckStatus::Fail, d),
        Err(e) => (CheckStatus::Fail, e.to_string()),
    };
    CheckResult {
        name: name.into(),
        status,
        detail,
    }
}

fn clone_symmetry(cloner: &BuiltCloner) -> crate::Result<f64> {
    let mut worst: f64 = 0.0;
    for psi in probe_states() {
        let clones = cloner.isometry.clone_states(&psi)?;
        for rho in &clones[1..] {
            worst = worst.max(rho.max_abs_diff(&clones[0])?);
        }
    }
    Ok(worst)
}

fn fidelity_gap(cloner: &BuiltCloner, eta: f64) -> crate::Result<f64> {
    let mut worst: f64 = 0.0;
    for psi in probe_states() {
        for rho in cloner.isometry.clone_states(&psi)? {
            worst = worst.max((fidelity_pure(&psi, &rho)? - (1.0 + eta) / 2.0).abs());
        }
    }
    Ok(worst)
}

/// Isometry, constraints, isotropy, symmetry and fidelity of the simple cloner.
pub fn check_simple_cloner(eta: f64) -> crate::Result<Check> {
    let built = build_simple_cloner(eta)?;
    let Ancillas::Simple(anc) = &built.ancillas else {
        return Ok(Err("unexpected ancilla kind".into()));
    };
    let iso = built.isometry.isometry_residual();
    let constraints = check_simple_constraints(&built.spec, anc)?;
    let measured = measured_reduction_factor(&built.isometry)?;
    let symmetry = clone_symmetry(&built)?;
    let fidelity = fidelity_gap(&built, eta)?;
    let detail = format!(
        "eta {eta}: isometry {iso:.1e}, constraints {:.1e}, measured eta {measured}, symmetry {symmetry:.1e}, fidelity gap {fidelity:.1e}",
        constraints.max_residual
    );
    let ok = iso <= ALGEBRAIC_TOL
        && constraints.pass
        && (measured - eta).abs() <= ISOTROPY_TOL
        && symmetry <= ALGEBRAIC_TOL
        && fidelity <= ISOTROPY_TOL;
    Ok(if ok { Ok(detail) } else { Err(detail) })
}

/// Runs every invariant check; nothing is printed.
pub fn run_verify(config: &VerifyConfig) -> VerifyReport {
    let mut checks = Vec::new();

    checks.push(outcome(
        "bell_partial_transpose",
        (|| {
            let bell = DensityOperator::from_pure(&phi_plus(), FactorShape::qubits(2))?;
            let eig = hermitian_eigenvalues(&bell.partial_transpose(1)?)?;
            let expected = [-0.5, 0.5, 0.5, 0.5];
            let gap = eig.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let d = format!("spectrum {eig:?}");
            Ok(if gap <= ALGEBRAIC_TOL { Ok(d) } else { Err(d) })
        })(),
    ));

    for eta in [0.58, 0.60, 0.62, 2.0 / 3.0] {
        checks.push(outcome(&format!("simple_cloner_{eta:.4}"), check_simple_cloner(eta)));
    }

    checks.push(outcome(
        "gisin_massar_reduction",
        (|| {
            let built = build_gisin_massar_3()?;
            let measured = measured_reduction_factor(&built.isometry)?;
            let symmetry = clone_symmetry(&built)?;
            let d = format!("measured eta {measured}, symmetry {symmetry:.1e}");
            Ok(if (measured - ETA_13).abs() <= ALGEBRAIC_TOL && symmetry <= ALGEBRAIC_TOL {
                Ok(d)
            } else {
                Err(d)
            })
        })(),
    ));

    let rows = sweep_with(&config.eta_grid, &config.alpha_grid, &config.forms);
    let bad: Vec<&SweepRow> = rows.iter().filter(|r| r.disagreement).collect();
    checks.push(CheckResult {
        name: "closed_form_equivalence".into(),
        status: if bad.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: match bad.first() {
            None => format!("{} grid points agree", rows.len()),
            Some(r) => format!(
                "{} of {} points disagree, first at eta {} alpha² {} (deviation {:?}{})",
                bad.len(),
                rows.len(),
                r.eta,
                r.alpha_sq,
                r.closed_form_deviation,
                r.error.as_deref().map(|e| format!(", {e}")).unwrap_or_default()
            ),
        },
    });

    let violations = rows
        .iter()
        .filter(|r| r.nonlocal_verdict == Some(Verdict::Entangled) && r.local_verdict != Some(Verdict::Separable))
        .count();
    checks.push(CheckResult {
        name: "complementarity".into(),
        status: if violations == 0 { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: format!("{violations} points with both pairs entangled"),
    });

    checks.push(outcome(
        "optimal_range",
        (|| {
            let cloner = build_simple_cloner(2.0 / 3.0)?.isometry;
            let numeric = numeric_alpha_range(&cloner, BISECTION_TOL)?;
            let analytic = inseparable_alpha_range(2.0 / 3.0)?;
            let gap = match (numeric.bounds, analytic.bounds) {
                (Some((a, b)), Some((x, y))) => (a - x).abs().max((b - y).abs()),
                _ => f64::INFINITY,
            };
            let d = format!("numeric {} vs analytic {}", describe(&numeric), describe(&analytic));
            Ok(if gap <= 1e-6 && numeric.note.is_none() { Ok(d) } else { Err(d) })
        })(),
    ));

    checks.push(outcome(
        "threshold",
        (|| {
            let t = 1.0 / 3f64.sqrt();
            let above = numeric_alpha_range(&build_simple_cloner(t + 1e-3)?.isometry, BISECTION_TOL)?;
            let below = numeric_alpha_range(&build_simple_cloner(t - 1e-3)?.isometry, BISECTION_TOL)?;
            let at = inseparable_alpha_range(t)?;
            let d = format!(
                "eta 1/sqrt3 ± 1e-3: {} / {}; analytic at 1/sqrt3: {}",
                describe(&above),
                describe(&below),
                describe(&at)
            );
            Ok(if !above.is_empty() && above.width() > 0.0 && below.is_empty() && at.width() == 0.0 {
                Ok(d)
            } else {
                Err(d)
            })
        })(),
    ));

    checks.push(outcome(
        "three_copy_broadcast",
        (|| {
            let cloner = build_gisin_massar_3()?.isometry;
            let mut worst: f64 = 0.0;
            let mut entangled = 0;
            for a2 in linspace(0.0, 1.0, 101) {
                let input = EntangledInput::new(a2)?;
                let r = run_broadcast(&input, &cloner)?;
                let expected = closed_form_nonlocal_3(&input)?;
                for p in &r.nonlocal_pairs {
                    worst = worst.max(p.state.max_abs_diff(&expected)?);
                    if ppt_verdict(&p.state, DEFAULT_PPT_TOL)?.verdict.is_entangled() {
                        entangled += 1;
                    }
                }
            }
            let half = run_broadcast(&EntangledInput::new(0.5)?, &cloner)?;
            let s = fit_scaled_form(half.nonlocal(), &phi_plus())?.s;
            let d = format!("deviation {worst:.1e}, {entangled} entangled pairs, s {s}");
            Ok(if worst <= ALGEBRAIC_TOL && entangled == 0 && (s - 25.0 / 81.0).abs() <= ALGEBRAIC_TOL {
                Ok(d)
            } else {
                Err(d)
            })
        })(),
    ));

    checks.push(outcome(
        "nonlocal_scaling",
        (|| {
            let seven = nonlocal_scaling(7)?;
            let best = max_entangled_copies();
            let d = format!("s_nl(7) = {}, max entangled copies {best}", seven.s_nl);
            Ok(if seven.verdict == ScalingVerdict::Separable && best == 6 {
                Ok(d)
            } else {
                Err(d)
            })
        })(),
    ));

    let (a2, c2) = config.general;
    let search = SearchConfig {
        seed: config.seed,
        ..SearchConfig::default()
    };
    let general = build_general_cloner(a2.sqrt(), c2.sqrt(), &search);
    let name = "general_cloner_form";
    checks.push(match general {
        Err(Error::Infeasible { restarts, best_residual }) => CheckResult {
            name: name.into(),
            status: CheckStatus::Inconclusive,
            detail: format!("no feasible realization in {restarts} restarts (best {best_residual:.1e})"),
        },
        Err(e) => outcome(name, Err(e)),
        Ok(built) => outcome(
            name,
            (|| {
                let eta = a2 - c2;
                let mut worst: f64 = 0.0;
                for a in [0.2, 0.5, 0.8] {
                    let input = EntangledInput::new(a)?;
                    let r = run_broadcast(&input, &built.isometry)?;
                    let expected = (config.forms.nonlocal)(&input, eta)?;
                    for p in &r.nonlocal_pairs {
                        worst = worst.max(p.state.max_abs_diff(&expected)?);
                    }
                }
                let d = format!("a² {a2}, c² {c2}: nonlocal deviation {worst:.1e} at eta {eta}");
                Ok(if worst <= 1e-9 { Ok(d) } else { Err(d) })
            })(),
        ),
    });

    VerifyReport { checks }
}

fn cmd_verify(seed: u64, ts: &str) -> Outcome {
    let report = run_verify(&VerifyConfig {
        seed,
        ..VerifyConfig::default()
    });
    let mut env = ReportEnvelope::new("verify", ts).param("seed", seed);
    for c in &report.checks {
        env.row(c);
    }
    let count = |s| report.checks.iter().filter(|c| c.status == s).count();
    let (pass, fail, inconclusive) = (
        count(CheckStatus::Pass),
        count(CheckStatus::Fail),
        count(CheckStatus::Inconclusive),
    );
    env.summarize("passed", pass);
    env.summarize("failed", fail);
    env.summarize("inconclusive", inconclusive);
    let mut out = Outcome::new(env);
    out.footer
        .push(format!("{pass} passed, {fail} failed, {inconclusive} inconclusive"));
    for c in report.failed() {
        out.diagnostics.push(format!("FAILED {}: {}", c.name, c.detail));
    }
    if !report.passed() {
        out.status = EXIT_INVARIANT;
    }
    out
}

fn timestamp(fixed: Option<String>) -> String {
    fixed.unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let ts = timestamp(cli.timestamp);
    let result = match cli.command {
        Command::Range { eta, numeric } => cmd_range(eta, numeric, &ts),
        Command::Sweep { eta_grid, alpha_grid } => cmd_sweep(
            eta_grid.unwrap_or_else(default_eta_grid),
            alpha_grid.unwrap_or_else(default_alpha_grid),
            &ts,
        ),
        Command::Clone3 { alpha_sq } => cmd_clone3(alpha_sq, &ts),
        Command::Nonlocal { max_m } => cmd_nonlocal(max_m, &ts),
        Command::Verify => Ok(cmd_verify(cli.seed, &ts)),
    };
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let text = match out.render(cli.format) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_IO;
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write report: {e}");
        return EXIT_IO;
    }
    for d in &out.diagnostics {
        let _ = writeln!(stderr, "{d}");
    }
    out.status
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadcast::closed_form_nonlocal;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("qbroadcast").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn sig7_examples() {
        assert_eq!(sig7(0.10968763), "0.1096876");
        assert_eq!(sig7(22.0 / 70.0), "0.3142857");
        assert_eq!(sig7(1.0), "1.000000");
        assert_eq!(sig7(-0.5), "-0.5000000");
        assert_eq!(sig7(1.5e-12), "1.500000e-12");
        assert_eq!(sig7(0.0), "0");
    }

    #[test]
    fn range_optimal() {
        let (code, out, _) = run_args(&["range", "--eta", "0.6666666666666666"]);
        assert_eq!(code, 0);
        assert!(out.contains("nonlocal inseparable: [0.1096876, 0.8903124]"), "{out}");
    }

    #[test]
    fn range_below_threshold_is_empty() {
        let (code, out, _) = run_args(&["range", "--eta", "0.5"]);
        assert_eq!(code, 0);
        assert!(out.contains("nonlocal inseparable: empty"), "{out}");
    }

    #[test]
    fn range_domain_error() {
        let (code, out, err) = run_args(&["range", "--eta", "1.5"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("eta"), "{err}");
        let (code, _, _) = run_args(&["range", "--eta", "-0.1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn usage_errors_and_help() {
        assert_eq!(run_args(&["range"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["nonlocal", "--max-m", "0"]).0, EXIT_USAGE);
        for cmd in ["range", "sweep", "clone3", "nonlocal", "verify"] {
            let (code, out, _) = run_args(&[cmd, "--help"]);
            assert_eq!(code, 0);
            assert!(out.contains("Usage"), "{out}");
        }
    }

    #[test]
    fn nonlocal_table() {
        let (code, out, _) = run_args(&["nonlocal", "--max-m", "8"]);
        assert_eq!(code, 0);
        assert!(out.contains("max entangled copies: 6"), "{out}");
        assert!(out.contains("0.3142857"));
        assert!(out.contains("Boundary"));
    }

    #[test]
    fn clone3_reports() {
        let (code, out, _) = run_args(&["clone3", "--alpha-sq", "0.5", "--format", "json", "--timestamp", "t"]);
        assert_eq!(code, 0);
        let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
        let row = &env.rows[0];
        assert_eq!(row["verdict"], "Separable");
        assert!((row["s"].as_f64().unwrap() - 25.0 / 81.0).abs() <= 1e-10);
        let (_, out, _) = run_args(&["clone3", "--alpha-sq", "1.0", "--format", "json"]);
        let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
        assert!(env.rows[0]["coherence"].as_f64().unwrap().abs() <= 1e-15);
        assert_eq!(run_args(&["clone3", "--alpha-sq", "1.2"]).0, EXIT_USAGE);
    }

    #[test]
    fn sweep_csv_header_is_fixed() {
        let (code, out, _) = run_args(&["sweep", "--eta-grid", "0.6", "--alpha-grid", "0,0.5,1", "--format", "csv"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn json_round_trip() {
        let (_, out, _) = run_args(&["sweep", "--eta-grid", "0.6", "--alpha-grid", "0.1,0.3", "--format", "json"]);
        let env: ReportEnvelope = serde_json::from_str(&out).unwrap();
        let again = serde_json::to_string_pretty(&env).unwrap() + "\n";
        assert_eq!(again, out);
        let back: ReportEnvelope = serde_json::from_str(&again).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn faulty_closed_form_fails_equivalence() {
        fn flipped(input: &EntangledInput, eta: f64) -> crate::Result<DensityOperator> {
            let mut m = closed_form_nonlocal(input, eta)?.into_matrix();
            let coherence = m[(0, 3)];
            m[(0, 3)] = -coherence;
            m[(3, 0)] = -coherence;
            DensityOperator::new(m, FactorShape::qubits(2))
        }
        let config = VerifyConfig {
            forms: ClosedForms {
                nonlocal: flipped,
                ..ClosedForms::default()
            },
            eta_grid: vec![0.6],
            alpha_grid: vec![0.3, 0.5],
            ..VerifyConfig::default()
        };
        let report = run_verify(&config);
        assert!(!report.passed());
        assert_eq!(report.get("closed_form_equivalence").unwrap().status, CheckStatus::Fail);
    }
}
