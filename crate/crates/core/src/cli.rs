//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when `verify` finds a deviation above
//! tolerance, 2 on usage errors (bad flags, out-of-range sizes, unwritable
//! output). Every report carries `d`, `h`, `n`, the tool version and the
//! tolerance constants in force; CSV reports put them on a leading `#` line.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::chains::{build_q, BISECTION_TOLERANCE};
use crate::eigenbasis::{
    build_full_basis, verify_eigenpair, VectorTag, CLOSED_FORM_TOLERANCE, EIGENPAIR_TOLERANCE,
    PIVOT_THRESHOLD,
};
use crate::error::Error;
use crate::mixing::{f_statistic, interchange_gap, wilson_lower_bound, wilson_witness};
use crate::oracle::{dense_eigensolve_symmetric, spectrum_compare, OFF_DIAGONAL_TOLERANCE};
use crate::simulator::{
    estimate_tv_lower_bound, run_trajectories, Observers, Permutation, SimulationConfig,
};
use crate::spectrum::{
    counting_identity, full_spectrum, gap_report, verify_x_equation, x_equation,
    X_EQUATION_TOLERANCE,
};
use crate::tree::TreeGeometry;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest tree accepted by commands that build dense `n x n` objects.
pub const MAX_DENSE_N: usize = 4000;
/// Allowed gap between the analytic spectrum and the oracle in `verify`.
pub const VERIFY_SPECTRUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "tree-spectrum",
    version,
    about = "Spectrum of the random walk on complete d-ary trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Branching factor (>= 2).
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub d: u32,
    /// Height (>= 1).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub h: u32,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues by family with their x roots and multiplicities.
    Spectrum {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// The full eigenbasis, one vector per row.
    Basis {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare everything against the dense Jacobi oracle.
    Verify {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Spectral gap of the walk and of the interchange process.
    Gap {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Wilson lower-bound threshold for the interchange process.
    Wilson {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo runs of the interchange process from the identity.
    Simulate {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit every trajectory as `trial,t,F_value` rows (CSV only).
        #[arg(long)]
        trace: bool,
        /// Estimate the total-variation lower bound at this time instead.
        #[arg(long)]
        tv: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// A rendered report and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub passed: bool,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn tolerances() -> Vec<(&'static str, f64)> {
    vec![
        ("bisection_tolerance", BISECTION_TOLERANCE),
        ("x_equation_tolerance", X_EQUATION_TOLERANCE),
        ("eigenpair_tolerance", EIGENPAIR_TOLERANCE),
        ("closed_form_tolerance", CLOSED_FORM_TOLERANCE),
        ("pivot_threshold", PIVOT_THRESHOLD),
        ("oracle_off_diagonal_tolerance", OFF_DIAGONAL_TOLERANCE),
        ("verify_spectrum_tolerance", VERIFY_SPECTRUM_TOLERANCE),
    ]
}

fn envelope(g: &TreeGeometry) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool_version".into(), json!(VERSION));
    m.insert("d".into(), json!(g.d()));
    m.insert("h".into(), json!(g.h()));
    m.insert("n".into(), json!(g.n()));
    for (k, v) in tolerances() {
        m.insert(k.into(), json!(v));
    }
    m
}

fn csv_preamble(g: &TreeGeometry) -> String {
    let mut s = format!(
        "# tree-spectrum {VERSION} d={} h={} n={}",
        g.d(),
        g.h(),
        g.n()
    );
    for (k, v) in tolerances() {
        write!(s, " {k}={v:e}").unwrap();
    }
    s.push('\n');
    s
}

fn render_json(m: Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("report serializes");
    s.push('\n');
    s
}

/// Flat key/value CSV for scalar reports.
fn render_kv_csv(g: &TreeGeometry, m: &Map<String, Value>) -> String {
    let mut s = csv_preamble(g);
    s.push_str("key,value\n");
    for (k, v) in m {
        let value = match v {
            Value::Number(x) if !x.is_i64() && !x.is_u64() => sci(x.as_f64().unwrap()),
            Value::String(x) => x.clone(),
            other => other.to_string(),
        };
        writeln!(s, "{k},{value}").unwrap();
    }
    s
}

fn geometry(tree: &TreeArgs) -> Result<TreeGeometry, CliError> {
    Ok(TreeGeometry::new(tree.d as usize, tree.h as usize)?)
}

fn dense_geometry(tree: &TreeArgs) -> Result<TreeGeometry, CliError> {
    let g = geometry(tree)?;
    if g.n() > MAX_DENSE_N {
        return Err(CliError::Usage(format!(
            "n = {} exceeds the dense limit {MAX_DENSE_N}",
            g.n()
        )));
    }
    Ok(g)
}

fn spectrum_report(tree: &TreeArgs, format: Format) -> Result<Report, CliError> {
    let g = geometry(tree)?;
    let table = full_spectrum(g.d(), g.h())?;
    let body = match format {
        Format::Csv => {
            let mut s = csv_preamble(&g);
            s.push_str("family,index_k_or_j,lambda,x_re,x_im,multiplicity\n");
            for l in &table.lines {
                let x = l.x_pair.0;
                writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    l.family.name(),
                    l.family.index(),
                    sci(l.lambda),
                    sci(x.re),
                    sci(x.im),
                    l.multiplicity
                )
                .unwrap();
            }
            s
        }
        Format::Json => {
            let mut m = envelope(&g);
            let col = |f: &dyn Fn(&crate::spectrum::SpectralLine) -> Value| -> Value {
                Value::Array(table.lines.iter().map(f).collect())
            };
            m.insert("family".into(), col(&|l| json!(l.family.name())));
            m.insert("index_k_or_j".into(), col(&|l| json!(l.family.index())));
            m.insert("lambda".into(), col(&|l| json!(l.lambda)));
            m.insert("x_re".into(), col(&|l| json!(l.x_pair.0.re)));
            m.insert("x_im".into(), col(&|l| json!(l.x_pair.0.im)));
            m.insert("multiplicity".into(), col(&|l| json!(l.multiplicity)));
            render_json(m)
        }
    };
    Ok(Report { body, passed: true })
}

fn basis_report(tree: &TreeArgs, format: Format) -> Result<Report, CliError> {
    let g = dense_geometry(tree)?;
    let basis = build_full_basis(&g)?;
    let q = build_q(&g);
    let max_residual = basis.max_residual(&q);
    let (rank, smallest_pivot) = basis.rank();
    let passed = max_residual <= EIGENPAIR_TOLERANCE && rank == g.n();
    let body = match format {
        Format::Csv => {
            let mut s = csv_preamble(&g);
            writeln!(
                s,
                "# max_residual={max_residual:e} rank={rank} smallest_pivot={smallest_pivot:e}"
            )
            .unwrap();
            s.push_str("kind,j,k,v,lambda,residual");
            for i in 0..g.n() {
                write!(s, ",f_{i}").unwrap();
            }
            s.push('\n');
            for rec in &basis.vectors {
                let tag = match rec.tag {
                    VectorTag::AllOnes => "all_ones,,,".to_string(),
                    VectorTag::Symmetric { j } => format!("symmetric,{j},,"),
                    VectorTag::AntiSymmetric { k, v, j } => format!("antisymmetric,{j},{k},{v}"),
                };
                write!(
                    s,
                    "{tag},{},{}",
                    sci(rec.lambda),
                    sci(verify_eigenpair(&q, rec))
                )
                .unwrap();
                for &x in &rec.values {
                    write!(s, ",{}", sci(x)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut m = envelope(&g);
            m.insert("vectors".into(), json!(basis.len()));
            m.insert("max_residual".into(), json!(max_residual));
            m.insert("rank".into(), json!(rank));
            m.insert("smallest_pivot".into(), json!(smallest_pivot));
            m.insert("passed".into(), json!(passed));
            render_json(m)
        }
    };
    Ok(Report { body, passed })
}

fn verify_report(tree: &TreeArgs, format: Format) -> Result<Report, CliError> {
    let g = dense_geometry(tree)?;
    let table = full_spectrum(g.d(), g.h())?;
    let q = build_q(&g);
    let oracle = dense_eigensolve_symmetric(q.entries(), g.n())?;
    let spectrum_deviation = spectrum_compare(&table, &oracle.eigenvalues)?;

    let x_residual = table
        .lines
        .iter()
        .filter_map(|l| {
            x_equation(l.family, g.h()).map(|e| verify_x_equation(g.d(), e, l.x_pair.0))
        })
        .fold(0.0, f64::max);

    let basis = build_full_basis(&g)?;
    let max_residual = basis.max_residual(&q);
    let (rank, smallest_pivot) = basis.rank();
    let closed_form_deviation = basis
        .vectors
        .iter()
        .filter_map(|r| r.closed_form_deviation(g.d()))
        .fold(0.0, f64::max);

    let counting = counting_identity(g.d() as u64, g.h() as u32);
    let counting_holds = matches!(counting, Some((a, b)) if a == b);

    let passed = spectrum_deviation <= VERIFY_SPECTRUM_TOLERANCE
        && x_residual <= X_EQUATION_TOLERANCE
        && max_residual <= EIGENPAIR_TOLERANCE
        && rank == g.n()
        && closed_form_deviation <= CLOSED_FORM_TOLERANCE
        && counting_holds;

    let mut m = envelope(&g);
    m.insert("spectrum_max_deviation".into(), json!(spectrum_deviation));
    m.insert("oracle_residual".into(), json!(oracle.residual));
    m.insert("oracle_sweeps".into(), json!(oracle.sweeps));
    m.insert("x_equation_max_residual".into(), json!(x_residual));
    m.insert("basis_max_residual".into(), json!(max_residual));
    m.insert("basis_rank".into(), json!(rank));
    m.insert("basis_smallest_pivot".into(), json!(smallest_pivot));
    m.insert(
        "closed_form_max_deviation".into(),
        json!(closed_form_deviation),
    );
    m.insert(
        "counting_identity_count".into(),
        json!(counting.map(|c| c.0.to_string())),
    );
    m.insert(
        "counting_identity_n".into(),
        json!(counting.map(|c| c.1.to_string())),
    );
    m.insert("counting_identity_holds".into(), json!(counting_holds));
    m.insert("passed".into(), json!(passed));
    Ok(Report {
        body: render(&g, m, format),
        passed,
    })
}

fn render(g: &TreeGeometry, m: Map<String, Value>, format: Format) -> String {
    match format {
        Format::Csv => render_kv_csv(g, &m),
        Format::Json => render_json(m),
    }
}

fn gap_summary(tree: &TreeArgs, format: Format) -> Result<Report, CliError> {
    let g = geometry(tree)?;
    let table = full_spectrum(g.d(), g.h())?;
    let gap = gap_report(&table);
    let ig = interchange_gap(g.d(), g.h())?;
    let mut m = envelope(&g);
    if let Value::Object(fields) = serde_json::to_value(gap).expect("gap serializes") {
        m.extend(fields);
    }
    let scale = (g.d() as f64 + 1.0) / (2.0 * (g.n() as f64 - 1.0));
    m.insert("interchange_gap".into(), json!(ig.gap));
    m.insert("interchange_gap_formula".into(), json!(ig.formula));
    m.insert(
        "interchange_gap_deviation".into(),
        json!((ig.gap - ig.formula).abs()),
    );
    m.insert("interchange_scale".into(), json!(scale));
    Ok(Report {
        body: render(&g, m, format),
        passed: true,
    })
}

fn wilson_summary(tree: &TreeArgs, epsilon: f64, format: Format) -> Result<Report, CliError> {
    let g = geometry(tree)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CliError::Usage(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    let report = wilson_lower_bound(&g, epsilon)?;
    let witness = wilson_witness(&g, &full_spectrum(g.d(), g.h())?)?;
    let mut m = envelope(&g);
    if let Value::Object(fields) = serde_json::to_value(&report).expect("report serializes") {
        m.extend(fields);
    }
    m.insert("real_x_regime".into(), json!(witness.real_x_regime));
    Ok(Report {
        body: render(&g, m, format),
        passed: true,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_summary(
    tree: &TreeArgs,
    steps: usize,
    trials: usize,
    seed: u64,
    trace: bool,
    tv: Option<usize>,
    format: Format,
) -> Result<Report, CliError> {
    let g = geometry(tree)?;
    if trials < 1 {
        return Err(CliError::Usage("trials must be >= 1".into()));
    }
    if trace && format == Format::Json {
        return Err(CliError::Usage(
            "--trace is only available with --format csv".into(),
        ));
    }
    if trace && tv.is_some() {
        return Err(CliError::Usage("--trace and --tv are exclusive".into()));
    }
    let witness = wilson_witness(&g, &full_spectrum(g.d(), g.h())?)?;
    let f = witness.f;
    let f_id = f_statistic(&f, &Permutation::identity(g.n()));
    let lambda2 = full_spectrum(g.d(), g.h())?.lambda2();
    let lambda_prime = crate::mixing::contraction_factor(g.d(), g.h(), lambda2)?;

    let mut cfg = SimulationConfig::new(g.d(), g.h(), steps, trials, seed);
    let mut m = envelope(&g);
    m.insert("trials".into(), json!(trials));
    m.insert("seed".into(), json!(seed));
    m.insert("f_id".into(), json!(f_id));
    m.insert("lambda_prime".into(), json!(lambda_prime));

    if let Some(t) = tv {
        let est =
            estimate_tv_lower_bound(&cfg, &f, t).map_err(|e| CliError::Usage(e.to_string()))?;
        if let Value::Object(fields) = serde_json::to_value(est).expect("estimate serializes") {
            m.extend(fields);
        }
        return Ok(Report {
            body: render(&g, m, format),
            passed: true,
        });
    }

    cfg.observers = Observers {
        f_trace: trace,
        ..Observers::default()
    };
    let stats = run_trajectories(&cfg, &f)?;
    let predicted: Vec<f64> = (0..=steps)
        .map(|t| lambda_prime.powi(t as i32) * f_id)
        .collect();
    let body = match (format, trace) {
        (Format::Csv, true) => {
            let mut s = csv_preamble(&g);
            s.push_str("trial,t,F_value\n");
            for (trial, tr) in stats
                .traces
                .as_ref()
                .expect("traces requested")
                .iter()
                .enumerate()
            {
                for (t, v) in tr.iter().enumerate() {
                    writeln!(s, "{trial},{t},{}", sci(*v)).unwrap();
                }
            }
            s
        }
        (Format::Csv, false) => {
            let mut s = csv_preamble(&g);
            writeln!(
                s,
                "# trials={trials} seed={seed} f_id={f_id:e} lambda_prime={lambda_prime:e}"
            )
            .unwrap();
            s.push_str("t,F_mean,F_var,predicted_mean\n");
            let rows = stats
                .f_mean_per_step
                .iter()
                .zip(&stats.f_var_per_step)
                .zip(&predicted);
            for (t, ((mean, var), pred)) in rows.enumerate() {
                writeln!(s, "{t},{},{},{}", sci(*mean), sci(*var), sci(*pred)).unwrap();
            }
            s
        }
        (Format::Json, _) => {
            m.insert("steps".into(), json!(steps));
            m.insert("f_mean_per_step".into(), json!(stats.f_mean_per_step));
            m.insert("f_var_per_step".into(), json!(stats.f_var_per_step));
            m.insert("predicted_mean_per_step".into(), json!(predicted));
            render_json(m)
        }
    };
    Ok(Report { body, passed: true })
}

/// Build the report for a parsed command line.
pub fn execute(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Spectrum { tree, out } => spectrum_report(tree, out.format.unwrap_or(Format::Csv)),
        Command::Basis { tree, out } => basis_report(tree, out.format.unwrap_or(Format::Csv)),
        Command::Verify { tree, out } => verify_report(tree, out.format.unwrap_or(Format::Json)),
        Command::Gap { tree, out } => gap_summary(tree, out.format.unwrap_or(Format::Json)),
        Command::Wilson { tree, epsilon, out } => {
            wilson_summary(tree, *epsilon, out.format.unwrap_or(Format::Json))
        }
        Command::Simulate {
            tree,
            steps,
            trials,
            seed,
            trace,
            tv,
            out,
        } => {
            let default = if *trace { Format::Csv } else { Format::Json };
            simulate_summary(
                tree,
                *steps,
                *trials,
                *seed,
                *trace,
                *tv,
                out.format.unwrap_or(default),
            )
        }
    }
}

fn output_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Spectrum { out, .. }
        | Command::Basis { out, .. }
        | Command::Verify { out, .. }
        | Command::Gap { out, .. }
        | Command::Wilson { out, .. }
        | Command::Simulate { out, .. } => out.output.as_ref(),
    }
}

/// Parse, run, write; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let report = match execute(&cli.command) {
        Ok(r) => r,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let written = match output_path(&cli.command) {
        Some(path) => std::fs::write(path, &report.body),
        None => std::io::stdout().lock().write_all(report.body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    if report.passed {
        0
    } else {
        eprintln!("verification failed");
        1
    }
}
