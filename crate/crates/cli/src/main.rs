use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fmsilp_core::approx::value_sequence;
use fmsilp_core::convex::run_convex;
use fmsilp_core::duality::{analyze_model, AnalysisConfig, ModelAnalysis};
use fmsilp_core::error::Error;
use fmsilp_core::farkas::is_consequence;
use fmsilp_core::fm::{run_elimination, EliminationOptions, FmError, OrderRule};
use fmsilp_core::io::{
    analysis_report, certify, confidence_str, convex_report, farkas_report, parse_model, tri_str, IoError,
    ModelDoc,
};
use fmsilp_core::model::SilpModel;
use fmsilp_core::scalar::{parse_rational, Rational, Scalar};

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "fmsilp", version, about = "Fourier-Motzkin analysis of semi-infinite linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Input,
    Minfill,
}

#[derive(clap::Args)]
struct Common {
    /// Number of nested stages (families only).
    #[arg(long)]
    stages: Option<usize>,
    /// Rational arithmetic or binary64 with tolerances.
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    /// Variable elimination order.
    #[arg(long, value_enum, default_value = "input")]
    order: Order,
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full duality report.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Largest delta in the omega schedule; powers of two up to it are used.
        #[arg(long)]
        delta_max: Option<String>,
    },
    /// Dump the derived rows and multipliers of one stage.
    Eliminate {
        file: PathBuf,
        /// Comma separated variables to eliminate, in order.
        #[arg(long, value_delimiter = ',')]
        vars: Option<Vec<String>>,
        /// Stage of the grid schedule to instantiate.
        #[arg(long, default_value_t = 1)]
        stage: usize,
    },
    /// Is `c x >= d` implied by the model's rows?
    Farkas {
        file: PathBuf,
        /// Comma separated coefficients of `c`, one per variable.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<String>,
        /// Right-hand side `d`.
        #[arg(long, allow_hyphen_values = true)]
        d: String,
        #[command(flatten)]
        common: Common,
    },
    /// Values of the prefix programs `P_1 .. P_n`.
    Approx {
        file: PathBuf,
        /// Largest prefix length.
        #[arg(long)]
        n: usize,
    },
    /// Sampled convex program: Lagrangian dual, Slater scan and recovery.
    Convex {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Replay every certificate of a report against a model file.
    Certify { report: PathBuf, file: PathBuf },
}

enum Failure {
    Input(String),
    Budget(String),
    Verify(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Fm(FmError::RowBudgetExceeded { .. }) => Failure::Budget(e.to_string()),
            Error::Verification(_) => Failure::Verify(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Human readable lines; they move to stderr when stdout carries JSON.
/// Write errors such as a closed pipe are ignored.
struct Out {
    to_stderr: bool,
}

impl Out {
    fn new(json: Option<&PathBuf>) -> Out {
        Out { to_stderr: json.is_some_and(|p| p.as_os_str() == "-") }
    }

    fn line(&self, args: fmt::Arguments<'_>) {
        let _ = if self.to_stderr { writeln!(io::stderr(), "{}", args) } else { writeln!(io::stdout(), "{}", args) };
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        $out.line(format_args!($($arg)*))
    };
}

fn load(path: &Path) -> Result<ModelDoc, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e)))?;
    Ok(parse_model(&text)?)
}

fn rational(text: &str) -> Result<Rational, Failure> {
    parse_rational(text.trim()).ok_or_else(|| Failure::Input(format!("`{}` is not a rational literal", text)))
}

fn emit(report: &Value, target: Option<&PathBuf>) -> Outcome {
    let text = serde_json::to_string_pretty(report).expect("reports serialize");
    match target {
        Some(p) if p.as_os_str() == "-" => {
            let _ = writeln!(io::stdout(), "{}", text);
        }
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::Input(format!("{}: {}", p.display(), e)))?,
        None => {}
    }
    Ok(())
}

fn config(model: &SilpModel, common: &Common, exact: bool) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::for_model(model, exact);
    if let Some(s) = common.stages {
        cfg.stages = s.max(1);
    }
    if matches!(common.order, Order::Minfill) {
        cfg.elimination.order = OrderRule::MinFill;
    }
    cfg
}

fn print_summary<S: Scalar>(out: &Out, a: &ModelAnalysis<S>) {
    let v = &a.verdicts;
    for (k, st) in a.stages.iter().enumerate() {
        let p = &st.partition;
        say!(out, 
            "stage {}: rows {} derived {} I1/I2/I3/I4 {}/{}/{}/{} S {} delta2 {}",
            k + 1,
            st.system.len() - 1,
            st.result.rows.len(),
            p.i1.len(),
            p.i2.len(),
            p.i3.len(),
            p.i4.len(),
            st.diagnostics.s,
            st.diagnostics.delta2
        );
    }
    let tri = |name: &str, t: &fmsilp_core::duality::Verdict<fmsilp_core::duality::Tri>| {
        say!(out, "{:16} {} ({})", name, tri_str(t.value), confidence_str(t.confidence));
    };
    tri("primal_feasible", &v.primal_feasible);
    tri("primal_bounded", &v.primal_bounded);
    say!(out, "{:16} {} ({})", "primal_value", v.primal_value.value, confidence_str(v.primal_value.confidence));
    tri("primal_solvable", &v.primal_solvable);
    tri("dual_feasible", &v.dual_feasible);
    tri("dual_bounded", &v.dual_bounded);
    say!(out, "{:16} {} ({})", "dual_value", v.dual_value.value, confidence_str(v.dual_value.confidence));
    tri("dual_solvable", &v.dual_solvable);
    tri("zero_gap", &v.zero_gap);
    tri("strong_duality", &v.strong_duality);
    tri("tidy", &v.tidy);
}

fn analyze<S: Scalar>(model: &SilpModel, cfg: &AnalysisConfig, json_out: Option<&PathBuf>) -> Outcome {
    let a: ModelAnalysis<S> = analyze_model(model, cfg)?;
    print_summary(&Out::new(json_out), &a);
    let report = analysis_report(model, &a);
    emit(&report, json_out)?;
    let bad = a.invariant_violations();
    if !bad.is_empty() {
        return Err(Failure::Verify(bad.join("; ")));
    }
    Ok(())
}

fn with_delta_max(cfg: &mut AnalysisConfig, text: &str) -> Outcome {
    let max = rational(text)?;
    let two = Rational::from_integer(2.into());
    let mut d = two.clone();
    let mut out = Vec::new();
    while d <= max {
        out.push(d.clone());
        d *= two.clone();
    }
    if out.last() != Some(&max) && max > Rational::from_integer(0.into()) {
        out.push(max);
    }
    cfg.deltas = out;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Analyze { file, common, delta_max } => {
            let model = load(&file)?.silp()?;
            let exact = matches!(common.mode, Mode::Exact);
            let mut cfg = config(&model, &common, exact);
            if let Some(x) = &delta_max {
                with_delta_max(&mut cfg, x)?;
            }
            if exact {
                analyze::<Rational>(&model, &cfg, common.json.as_ref())
            } else {
                analyze::<f64>(&model, &cfg, common.json.as_ref())
            }
        }
        Command::Eliminate { file, vars, stage } => {
            let out = Out::new(None);
            let model = load(&file)?.silp()?;
            let sys = model.instantiate_stage::<Rational>(stage).map_err(Error::from)?;
            let mut opts = EliminationOptions::default();
            if let Some(names) = vars {
                let idx = names
                    .iter()
                    .map(|n| model.var_index(n.trim()).map_err(|e| Failure::Input(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                opts.order = OrderRule::Explicit(idx);
            }
            let res = run_elimination(&sys, &opts).map_err(Error::from)?;
            let rows: Vec<Value> = res
                .rows
                .iter()
                .map(|r| {
                    let mult: serde_json::Map<String, Value> =
                        r.mult.labelled(&sys).into_iter().map(|(id, w)| (id.label(), Value::String(w.render()))).collect();
                    json!({
                        "id": r.id,
                        "coeffs": r.row.coeffs.iter().map(|c| c.render()).collect::<Vec<_>>(),
                        "rhs": r.row.rhs.render(),
                        "multiplier": mult,
                    })
                })
                .collect();
            let steps: Vec<Value> = res
                .steps
                .iter()
                .map(|s| json!({"var": model.variables[s.var], "kind": format!("{:?}", s.kind), "rows_after": s.rows_after}))
                .collect();
            say!(out, "{}", serde_json::to_string_pretty(&json!({"version": "1", "stage": stage, "steps": steps, "rows": rows})).unwrap());
            Ok(())
        }
        Command::Farkas { file, c, d, common } => {
            let model = load(&file)?.silp()?;
            let out = Out::new(common.json.as_ref());
            let cv = c.iter().map(|s| rational(s)).collect::<Result<Vec<_>, _>>()?;
            if cv.len() != model.n() {
                return Err(Failure::Input(format!("--c needs {} entries", model.n())));
            }
            let dv = rational(&d)?;
            let exact = matches!(common.mode, Mode::Exact);
            let cfg = config(&model, &common, exact);
            let stage = if model.is_finite() { 1 } else { cfg.stages };
            let report = if exact {
                let ans = is_consequence::<Rational>(&model, &cv, &dv, &cfg)?;
                farkas_report(&model, &cv, &dv, stage, &ans)
            } else {
                let ans = is_consequence::<f64>(&model, &cv, &dv, &cfg)?;
                let cf: Vec<f64> = cv.iter().map(f64::from_rational).collect();
                farkas_report(&model, &cf, &f64::from_rational(&dv), stage, &ans)
            };
            say!(out, "verdict {} (z* = {})", report["verdict"].as_str().unwrap_or("?"), report["z_star"].as_str().unwrap_or("?"));
            emit(&report, common.json.as_ref())
        }
        Command::Approx { file, n } => {
            let out = Out::new(None);
            let model = load(&file)?.silp()?;
            let seq = value_sequence::<Rational>(&model, n, &EliminationOptions::default())?;
            for (k, v) in seq.values.iter().enumerate() {
                say!(out, "P_{}\t{}", k + 1, v);
            }
            say!(out, "diverging\t{}", seq.diverging);
            if seq.values.windows(2).any(|w| w[0].gt(&w[1])) {
                return Err(Failure::Verify("prefix values decrease".into()));
            }
            Ok(())
        }
        Command::Convex { file, common } => {
            let doc = load(&file)?;
            let ModelDoc::Convex { program, stage } = &doc else {
                return Err(Failure::Input("not a convex model file".into()));
            };
            let model = doc.silp()?;
            let out = Out::new(common.json.as_ref());
            let exact = matches!(common.mode, Mode::Exact);
            let cfg = config(&model, &common, exact);
            let report = if exact {
                let res = run_convex::<Rational>(program, *stage, &cfg)?;
                print_summary(&out, &res.analysis);
                convex_report(&res)
            } else {
                let res = run_convex::<f64>(program, *stage, &cfg)?;
                print_summary(&out, &res.analysis);
                convex_report(&res)
            };
            let cv = &report["convex"];
            say!(out, "slater_point     {}", cv["slater_point"]);
            if let Some(l) = cv["lagrangian"].as_object() {
                say!(out, "lambda*          {}", l["lambda"]);
                say!(out, "L(lambda*)       {}", l["L_value"]);
                say!(out, "x_bar            {}", l["x_bar"]);
            }
            emit(&report, common.json.as_ref())?;
            if cv["slater_prediction_holds"] == json!(false) || cv["weak_duality_holds"] == json!(false) {
                return Err(Failure::Verify("convex cross-checks failed".into()));
            }
            Ok(())
        }
        Command::Certify { report, file } => {
            let out = Out::new(None);
            let text = fs::read_to_string(&report).map_err(|e| Failure::Input(format!("{}: {}", report.display(), e)))?;
            let value: Value = serde_json::from_str(&text).map_err(IoError::from)?;
            let model = load(&file)?.silp()?;
            let checks = certify(&value, &model)?;
            let mut failed = Vec::new();
            for c in &checks {
                match &c.outcome {
                    Ok(()) => say!(out, "ok      {}", c.name),
                    Err(e) => {
                        say!(out, "FAILED  {}: {}", c.name, e);
                        failed.push(c.name.clone());
                    }
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verify(format!("certificates failed: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {}", m);
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("error: {}", m);
            ExitCode::from(EXIT_BUDGET)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {}", m);
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
