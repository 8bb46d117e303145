//! conformal-workbench CLI
//!
//! Exact checks for the Block type Lie conformal algebra and its free
//! intermediate series modules. Every command writes one JSON (or text)
//! report; the exit code is 0 on success, 1 when checks fail, 2 on invalid
//! input and 3 when a deduction stops for any other reason.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use conformal_workbench::classify::{classify, ClassifyConfig, ClassifyError, NegativeRegion};
use conformal_workbench::conformal::{
    axiom_sweep, basis_bracket, bridge_sweep, BlockAlgebra, StructureTable, VirasoroAlgebra,
};
use conformal_workbench::formal::{self, TruncationPolicy};
use conformal_workbench::ratpoly::{parse_rational, rat, Rational};
use conformal_workbench::repmod::{
    family_sweep, is_isomorphic_diagonal, rescale_basis, shift_basis, Gauge, ModuleFamily,
    StructureCoeffTable,
};
use conformal_workbench::tableio::{emit_table, parse_table};

/// Seed used by randomized sweeps when `--seed` is absent.
const DEFAULT_SEED: u64 = 20_240_601;
const THREADS_ENV: &str = "CONFORMAL_WORKBENCH_THREADS";

#[derive(Parser)]
#[command(name = "conformal-workbench", version)]
#[command(about = "Exact checks for the Block type Lie conformal algebra and its modules")]
struct Cli {
    /// Output format
    #[arg(long, value_enum, global = true, default_value_t = Format::Json)]
    format: Format,

    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algebra {
    B,
    Virasoro,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    Vcd,
    Vd,
    Vdprime,
    Trivial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Region {
    Wide,
    Mirrored,
}

#[derive(clap::Args, Clone)]
struct FamilyArgs {
    /// Module family
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,

    /// Constant C (rational, e.g. 1/2)
    #[arg(long = "C", value_parser = parse_rational_arg, allow_hyphen_values = true)]
    c: Option<Rational>,

    /// Constant D (rational, e.g. -3/4)
    #[arg(long = "D", value_parser = parse_rational_arg, allow_hyphen_values = true)]
    d: Option<Rational>,

    /// Structure-coefficient table (JSON) instead of a family
    #[arg(long, conflicts_with = "family")]
    input: Option<PathBuf>,

    /// Read entries missing from --input as zero
    #[arg(long)]
    default_zero: bool,
}

#[derive(Subcommand)]
enum Commands {
    /// Lambda bracket of two generators
    Bracket {
        #[arg(long, allow_hyphen_values = true)]
        alpha: i64,
        #[arg(long, allow_hyphen_values = true)]
        beta: i64,
        #[arg(long, value_enum, default_value_t = Algebra::B)]
        algebra: Algebra,
    },
    /// Skew symmetry and Jacobi identity on a window of generators
    Axioms {
        #[arg(long, default_value_t = 3)]
        window: u32,
        #[arg(long, value_enum, default_value_t = Algebra::B)]
        algebra: Algebra,
    },
    /// Residue construction of lambda and j-products against the bracket
    Bridge {
        #[arg(long, default_value_t = 3)]
        window: u32,
        #[arg(long, default_value_t = 12)]
        depth: u32,
        #[arg(long, default_value_t = 4)]
        guard: u32,
        /// Restrict to one pair (requires --beta)
        #[arg(long, requires = "beta", allow_hyphen_values = true)]
        alpha: Option<i64>,
        #[arg(long, requires = "alpha", allow_hyphen_values = true)]
        beta: Option<i64>,
        /// Include the commutator distribution of the pair in the report
        #[arg(long, requires = "alpha")]
        dump: bool,
    },
    /// Functional equation of a module table on a window of triples
    ModuleCheck {
        #[command(flatten)]
        source: FamilyArgs,
        #[arg(long, default_value_t = 2)]
        window: u32,
        /// Check this many randomly drawn parameter choices of the family
        #[arg(long)]
        random_params: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search a shift and diagonal gauge relating two tables
    ModuleIso {
        /// vcd:C:D, vd:D, vdprime:D, trivial, or a table file
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long, default_value_t = 4)]
        window: u32,
    },
    /// Staged classification of a module table
    Classify {
        #[command(flatten)]
        source: FamilyArgs,
        /// Gauge applied to a --family table before classifying, e.g. 3^g
        #[arg(long, value_parser = parse_gauge_arg, allow_hyphen_values = true)]
        gauge: Option<Gauge>,
        /// Basis shift applied to a --family table before classifying
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<i64>,
        #[arg(long, default_value_t = 4)]
        window: u32,
        #[arg(long, default_value_t = 2)]
        max_degree: u32,
        #[arg(long, value_enum, default_value_t = Region::Mirrored)]
        negative_region: Region,
    },
    /// Export a family table as JSON
    Table {
        #[command(flatten)]
        source: FamilyArgs,
        /// Entries with |alpha|, |gamma| <= window
        #[arg(long, default_value_t = 8)]
        window: u32,
    },
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn parse_gauge_arg(s: &str) -> Result<Gauge, String> {
    s.parse()
        .map_err(|e: conformal_workbench::repmod::RepError| e.to_string())
}

/// Failure of a command, mapped onto the exit-code contract.
enum Failure {
    Input(String),
    Internal(String),
}

struct Outcome {
    payload: Value,
    failures: Vec<Value>,
    code: u8,
}

impl Outcome {
    fn new(payload: impl Serialize, failures: Vec<Value>) -> Result<Self, Failure> {
        let code = if failures.is_empty() { 0 } else { 1 };
        Ok(Self {
            payload: to_value(payload)?,
            failures,
            code,
        })
    }
}

fn to_value(x: impl Serialize) -> Result<Value, Failure> {
    serde_json::to_value(x).map_err(|e| Failure::Internal(e.to_string()))
}

fn command_name(c: &Commands) -> &'static str {
    match c {
        Commands::Bracket { .. } => "bracket",
        Commands::Axioms { .. } => "axioms",
        Commands::Bridge { .. } => "bridge",
        Commands::ModuleCheck { .. } => "module-check",
        Commands::ModuleIso { .. } => "module-iso",
        Commands::Classify { .. } => "classify",
        Commands::Table { .. } => "table",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let name = command_name(&cli.command);
    let start = Instant::now();
    let result = run(&cli.command);
    let timing_ms = start.elapsed().as_millis();

    if let Commands::Table { .. } = cli.command {
        if let Ok(o) = &result {
            let text = o.payload.as_str().unwrap_or_default().to_string() + "\n";
            return write_output(cli.out.as_ref(), &text)
                .map_or(ExitCode::from(3), |_| ExitCode::SUCCESS);
        }
    }

    let (mut report, code) = match result {
        Ok(o) => {
            let mut m = match o.payload {
                Value::Object(m) => m,
                other => {
                    let mut m = Map::new();
                    m.insert("result".into(), other);
                    m
                }
            };
            m.insert("failures".into(), Value::Array(o.failures));
            (m, o.code)
        }
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Input(m) => (2, "input", m),
                Failure::Internal(m) => (3, "internal", m),
            };
            eprintln!("error: {msg}");
            let mut m = Map::new();
            m.insert("error".into(), json!({ "kind": kind, "message": msg }));
            m.insert("failures".into(), Value::Array(vec![]));
            (m, code)
        }
    };
    report.insert("command".into(), Value::String(name.into()));
    report.insert(
        "version".into(),
        Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    report.insert("timing_ms".into(), json!(timing_ms));

    let text = match cli.format {
        Format::Json => {
            serde_json::to_string_pretty(&Value::Object(report)).unwrap_or_default() + "\n"
        }
        Format::Text => render_text(&report),
    };
    match write_output(cli.out.as_ref(), &text) {
        Ok(()) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            ExitCode::from(3)
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn render_text(report: &Map<String, Value>) -> String {
    let mut out = String::new();
    for (k, v) in report {
        let shown = match v {
            Value::String(s) => s.clone(),
            Value::Array(a) if a.is_empty() => "none".into(),
            Value::Array(a) => {
                let mut s = format!("{} item(s)", a.len());
                for item in a.iter().take(20) {
                    s.push_str("\n  - ");
                    s.push_str(&item.to_string());
                }
                s
            }
            other => other.to_string(),
        };
        out.push_str(&format!("{k}: {shown}\n"));
    }
    out
}

fn run(command: &Commands) -> Result<Outcome, Failure> {
    match command {
        Commands::Bracket {
            alpha,
            beta,
            algebra,
        } => {
            let image = match algebra {
                Algebra::B => basis_bracket(*alpha, *beta),
                Algebra::Virasoro => VirasoroAlgebra.generator_bracket(*alpha, *beta),
            };
            let index = match algebra {
                Algebra::B => alpha + beta,
                Algebra::Virasoro => 0,
            };
            Outcome::new(
                json!({
                    "alpha": alpha,
                    "beta": beta,
                    "index": index,
                    "poly": image.get(index).to_string(),
                }),
                vec![],
            )
        }
        Commands::Axioms { window, algebra } => {
            if *window == 0 {
                return Err(Failure::Input("window must be at least 1".into()));
            }
            let report = match algebra {
                Algebra::B => axiom_sweep(&BlockAlgebra, *window),
                Algebra::Virasoro => axiom_sweep(&VirasoroAlgebra, *window),
            };
            let failures = report
                .failures
                .iter()
                .map(to_value)
                .collect::<Result<_, _>>()?;
            Outcome::new(
                json!({
                    "algebra": report.algebra,
                    "window": report.window,
                    "skew_checked": report.skew_checked,
                    "jacobi_checked": report.jacobi_checked,
                }),
                failures,
            )
        }
        Commands::Bridge {
            window,
            depth,
            guard,
            alpha,
            beta,
            dump,
        } => run_bridge(*window, *depth, *guard, *alpha, *beta, *dump),
        Commands::ModuleCheck {
            source,
            window,
            random_params,
            seed,
        } => run_module_check(
            source,
            *window,
            *random_params,
            seed.unwrap_or(DEFAULT_SEED),
        ),
        Commands::ModuleIso {
            left,
            right,
            window,
        } => {
            if *window == 0 {
                return Err(Failure::Input("window must be at least 1".into()));
            }
            let t1 = table_from_arg(left)?;
            let t2 = table_from_arg(right)?;
            let witness = is_isomorphic_diagonal(&t1, &t2, *window);
            Outcome::new(
                json!({
                    "left": t1.provenance(),
                    "right": t2.provenance(),
                    "window": window,
                    "isomorphic": witness.is_some(),
                    "witness": witness,
                }),
                vec![],
            )
        }
        Commands::Classify {
            source,
            gauge,
            shift,
            window,
            max_degree,
            negative_region,
        } => {
            let mut table = load_table(source)?;
            if gauge.is_some() || shift.is_some() {
                if source.input.is_some() {
                    return Err(Failure::Input(
                        "--gauge/--shift apply to --family tables only".into(),
                    ));
                }
                table = shift_basis(&table, shift.unwrap_or(0));
                if let Some(g) = gauge {
                    table = rescale_basis(&table, g).map_err(|e| Failure::Input(e.to_string()))?;
                }
            }
            let config = ClassifyConfig {
                window: *window,
                max_degree: *max_degree,
                negative_region: match negative_region {
                    Region::Wide => NegativeRegion::Wide,
                    Region::Mirrored => NegativeRegion::Mirrored,
                },
            };
            match classify(&table, config) {
                Ok(report) => {
                    let failures = if report.reconstructs {
                        vec![]
                    } else {
                        vec![json!({
                            "check": "reconstruction",
                            "detail": "the forced module does not reproduce the input table",
                        })]
                    };
                    let mut payload = to_value(&report)?;
                    payload["input"] = Value::String(table.provenance().to_string());
                    Outcome::new(payload, failures)
                }
                Err(ClassifyError::NotAModule {
                    alpha,
                    beta,
                    gamma,
                    residual,
                }) => Outcome::new(
                    json!({ "input": table.provenance(), "window": window, "module": false }),
                    vec![
                        json!({ "alpha": alpha, "beta": beta, "gamma": gamma, "residual": residual }),
                    ],
                ),
                Err(ClassifyError::Table(e)) => Err(Failure::Input(e.to_string())),
                Err(ClassifyError::WindowTooSmall(w)) => Err(Failure::Input(format!(
                    "window must be at least 2, got {w}"
                ))),
                Err(e) => Err(Failure::Internal(e.to_string())),
            }
        }
        Commands::Table { source, window } => {
            let table = load_table(source)?;
            let text = emit_table(&table, *window as i64, false)
                .map_err(|e| Failure::Input(e.to_string()))?;
            Ok(Outcome {
                payload: Value::String(text),
                failures: vec![],
                code: 0,
            })
        }
    }
}

fn run_bridge(
    window: u32,
    depth: u32,
    guard: u32,
    alpha: Option<i64>,
    beta: Option<i64>,
    dump: bool,
) -> Result<Outcome, Failure> {
    let policy = TruncationPolicy::new(depth, guard).map_err(|e| Failure::Input(e.to_string()))?;
    if guard < 4 {
        return Err(Failure::Input(format!(
            "bridge needs guard >= 4, got {guard}"
        )));
    }
    match (alpha, beta) {
        (Some(a), Some(b)) => {
            let got = conformal_workbench::conformal::residue_lambda_bracket(a, b, policy)
                .map_err(|e| Failure::Internal(e.to_string()))?;
            let expected = basis_bracket(a, b);
            let mut failures = vec![];
            if got != expected {
                failures.push(json!({
                    "alpha": a, "beta": b, "check": "lambda",
                    "expected": expected.to_string(), "got": got.to_string(),
                }));
            }
            let mut payload = json!({
                "alpha": a,
                "beta": b,
                "depth": depth,
                "guard": guard,
                "residue_bracket": got,
                "expected": expected,
            });
            if dump {
                payload["commutator"] =
                    to_value(formal::generator_commutator(a, b, policy).to_json())?;
            }
            Outcome::new(payload, failures)
        }
        _ => {
            let report =
                bridge_sweep(window, policy).map_err(|e| Failure::Internal(e.to_string()))?;
            let failures = report
                .failures
                .iter()
                .map(to_value)
                .collect::<Result<_, _>>()?;
            Outcome::new(
                json!({
                    "window": report.window,
                    "depth": report.depth,
                    "guard": report.guard,
                    "lambda_checked": report.lambda_checked,
                    "j_checked": report.j_checked,
                    "locality_checked": report.locality_checked,
                }),
                failures,
            )
        }
    }
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    rat(rng.gen_range(-9..=9), rng.gen_range(1..=6))
}

fn run_module_check(
    source: &FamilyArgs,
    window: u32,
    random_params: Option<usize>,
    seed: u64,
) -> Result<Outcome, Failure> {
    if window == 0 {
        return Err(Failure::Input("window must be at least 1".into()));
    }
    let tables: Vec<StructureCoeffTable> = match random_params {
        None => vec![load_table(source)?],
        Some(count) => {
            let kind = source
                .family
                .ok_or_else(|| Failure::Input("--random-params needs --family".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let c = random_rational(&mut rng);
                    let d = random_rational(&mut rng);
                    StructureCoeffTable::from_family(&make_family(kind, c, d))
                })
                .collect()
        }
    };
    let mut instances = Vec::new();
    let mut failures = Vec::new();
    let mut checked = 0;
    for t in &tables {
        let r = family_sweep(t, window).map_err(|e| Failure::Input(e.to_string()))?;
        checked += r.checked;
        for f in &r.failures {
            let mut v = to_value(f)?;
            v["table"] = Value::String(r.table.clone());
            failures.push(v);
        }
        instances
            .push(json!({ "table": r.table, "checked": r.checked, "failures": r.failures.len() }));
    }
    let mut payload = json!({ "window": window, "checked": checked });
    if random_params.is_some() {
        payload["seed"] = json!(seed);
        payload["instances"] = Value::Array(instances);
    } else {
        payload["table"] = Value::String(tables[0].provenance().to_string());
    }
    Outcome::new(payload, failures)
}

fn make_family(kind: FamilyKind, c: Rational, d: Rational) -> ModuleFamily {
    match kind {
        FamilyKind::Vcd => ModuleFamily::Vcd { c, d },
        FamilyKind::Vd => ModuleFamily::Vd { d },
        FamilyKind::Vdprime => ModuleFamily::VdPrime { d },
        FamilyKind::Trivial => ModuleFamily::Trivial,
    }
}

fn load_table(source: &FamilyArgs) -> Result<StructureCoeffTable, Failure> {
    if let Some(path) = &source.input {
        return read_table_file(path, source.default_zero);
    }
    let kind = source
        .family
        .ok_or_else(|| Failure::Input("either --family or --input is required".into()))?;
    let zero = Rational::default();
    let c = source.c.clone().unwrap_or_else(|| zero.clone());
    let d = source.d.clone().unwrap_or(zero);
    Ok(StructureCoeffTable::from_family(&make_family(kind, c, d)))
}

fn read_table_file(path: &PathBuf, default_zero: bool) -> Result<StructureCoeffTable, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let parsed = parse_table(&text, default_zero).map_err(|e| Failure::Input(e.to_string()))?;
    Ok(parsed
        .into_table()
        .with_provenance(path.display().to_string()))
}

fn table_from_arg(arg: &str) -> Result<StructureCoeffTable, Failure> {
    match arg.parse::<ModuleFamily>() {
        Ok(f) => Ok(StructureCoeffTable::from_family(&f)),
        Err(_) if std::path::Path::new(arg).exists() => {
            read_table_file(&PathBuf::from(arg), false)
        }
        Err(e) => Err(Failure::Input(format!("{e} (and no such table file)"))),
    }
}
