//! `harnad`: JSON front end for harnad-core.
//!
//! Exit codes: 0 success, 1 domain error, 2 I/O or parse error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use harnad_core::connection::ConnectionS;
use harnad_core::criteria::{is_irreducible_s, minimal_criterion, nonresonance_check};
use harnad_core::dual::{add_alpha, hd, ihd, mc_alpha};
use harnad_core::family::{family_from_json, SingularityFamily};
use harnad_core::flow::{Flow, FlowOptions, Path};
use harnad_core::hobject::{is_irreducible_h, is_stable, phi, HObject};
use harnad_core::kappa::kappa;
use harnad_core::normal_form::NormalForm;
use harnad_core::random::seeded_state;
use harnad_core::suite::run_all;
use harnad_core::theta_xi::{theta_build, xi_build, DeltaForm};
use harnad_core::{Error, Qi};

#[derive(Parser)]
#[command(name = "harnad", version, about = "Exact AHHP calculus and isomonodromy checks")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
}

#[derive(Args)]
struct Io {
    /// Input document.
    #[arg(long)]
    input: PathBuf,
    /// Output document; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct AlphaIo {
    #[command(flatten)]
    io: Io,
    /// Exact scalar such as `1/2` or `1/3+2i`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: String,
}

#[derive(Args)]
struct StateIo {
    #[command(flatten)]
    io: Io,
    /// Translate the closed-form state by a random G̃(T) element.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Connection → canonical HObject.
    Kappa(Io),
    /// HObject → connection.
    Phi(Io),
    /// Harnad dual of a connection.
    Hd(Io),
    /// Inverse Harnad dual.
    Ihd(Io),
    /// Adds `alpha/y` at the origin.
    Add(AlphaIo),
    /// Middle convolution.
    Mc(AlphaIo),
    CheckStable(Io),
    /// Accepts a connection or an HObject.
    CheckIrreducible(Io),
    /// Normal form input.
    CheckNonresonant(Io),
    CheckMinimal(Io),
    /// Validates a family and writes its closed-form state at the base point.
    FamilyCheck(Io),
    Theta(StateIo),
    Xi(StateIo),
    /// Integrates the flow along a path; writes the CSV report.
    Flow(FlowArgs),
    /// Runs the acceptance suites and prints a pass/fail table.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    io: Io,
    /// Path document `{"waypoints": [{"t1": "2"}, …]}`.
    #[arg(long)]
    path: PathBuf,
    /// RK4 steps; by default the step size is 1e-3.
    #[arg(long)]
    steps: Option<usize>,
    /// Residual abort threshold.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Also write the results as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

enum Failure {
    Domain(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(m) => Failure::Io(format!("parse error: {m}")),
            e => Failure::Domain(e),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read(p: &PathBuf) -> std::result::Result<String, Failure> {
    fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

fn parse<T: DeserializeOwned>(p: &PathBuf) -> std::result::Result<T, Failure> {
    let text = read(p)?;
    serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

fn emit_text(out: &Option<PathBuf>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit<T: Serialize>(out: &Option<PathBuf>, doc: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(doc).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    emit_text(out, &text)
}

fn alpha(s: &str) -> std::result::Result<Qi, Failure> {
    s.parse().map_err(|e: Error| Failure::Io(format!("--alpha: {e}")))
}

fn delta_json(d: &DeltaForm<Qi>) -> Value {
    let map = d.names().iter().zip(d.values()).map(|(n, m)| (n.clone(), serde_json::to_value(m).expect("matrix serializes"))).collect();
    Value::Object(map)
}

fn family(io: &Io) -> std::result::Result<SingularityFamily, Failure> {
    Ok(family_from_json(&read(&io.input)?)?)
}

fn state_forms(a: &StateIo, with_xi: bool) -> Outcome {
    let f = family(&a.io)?;
    let pt = f.base_point::<Qi>();
    let h = seeded_state(&f, &pt, a.seed)?;
    let theta = theta_build(&f, &pt, &h)?;
    let doc = if with_xi { delta_json(&xi_build(&f, &pt, &h, &theta)?) } else { delta_json(&theta) };
    emit(&a.io.output, &json!({ "state": h, "forms": doc }))
}

fn run(verb: Verb) -> Outcome {
    match verb {
        Verb::Kappa(io) => emit(&io.output, &kappa(&parse::<ConnectionS<Qi>>(&io.input)?)?),
        Verb::Phi(io) => emit(&io.output, &phi(&parse::<HObject<Qi>>(&io.input)?)?),
        Verb::Hd(io) => emit(&io.output, &hd(&parse::<ConnectionS<Qi>>(&io.input)?)?),
        Verb::Ihd(io) => emit(&io.output, &ihd(&parse::<ConnectionS<Qi>>(&io.input)?)?),
        Verb::Add(a) => {
            let al = alpha(&a.alpha)?;
            emit(&a.io.output, &add_alpha(&parse::<ConnectionS<Qi>>(&a.io.input)?, &al)?)
        }
        Verb::Mc(a) => {
            let al = alpha(&a.alpha)?;
            let m = mc_alpha(&parse::<ConnectionS<Qi>>(&a.io.input)?, &al)?;
            if let Some(ok) = m.admissible {
                eprintln!("admissible exponents: {ok}");
            }
            emit(&a.io.output, &m.connection)
        }
        Verb::CheckStable(io) => {
            let h: HObject<Qi> = parse(&io.input)?;
            emit(&io.output, &json!({ "stable": is_stable(&h) }))
        }
        Verb::CheckIrreducible(io) => {
            let v: Value = parse(&io.input)?;
            let irreducible = if v.get("blocks").is_some() {
                let h: HObject<Qi> = serde_json::from_value(v).map_err(|e| Failure::Io(e.to_string()))?;
                is_irreducible_h(&h)
            } else {
                let a: ConnectionS<Qi> = serde_json::from_value(v).map_err(|e| Failure::Io(e.to_string()))?;
                is_irreducible_s(&a)
            };
            emit(&io.output, &json!({ "irreducible": irreducible }))
        }
        Verb::CheckNonresonant(io) => {
            let nf: NormalForm<Qi> = parse(&io.input)?;
            emit(&io.output, &json!({ "nonresonant": nonresonance_check(&nf)? }))
        }
        Verb::CheckMinimal(io) => {
            let h: HObject<Qi> = parse(&io.input)?;
            emit(&io.output, &json!({ "minimal": minimal_criterion(&h)? }))
        }
        Verb::FamilyCheck(io) => {
            let f = family(&io)?;
            let h = f.closed_form::<Qi>(&f.base_point())?;
            eprintln!("family: n = {}, {} poles, dim W = {}, parameters {}", f.dim(), f.pole_count(), f.dim_w(), f.param_names().join(","));
            emit(&io.output, &h)
        }
        Verb::Theta(a) => state_forms(&a, false),
        Verb::Xi(a) => state_forms(&a, true),
        Verb::Flow(a) => {
            let f = family(&a.io)?;
            let path = Path::from_json(&f, &read(&a.path)?)?;
            let mut opts = FlowOptions::default();
            if let Some(t) = a.tol {
                opts.abort_threshold = t;
            }
            if let Some(h) = a.fd_step {
                opts.fd_step = h;
            }
            let flow = Flow::new(&f, opts)?;
            let start = flow.initial_state(a.seed)?;
            let steps = a.steps.unwrap_or_else(|| (path.length() / 1e-3).round().max(1.0) as usize);
            let report = flow.integrate(&start, &path, steps)?;
            let s = &report.summary;
            eprintln!(
                "{} steps of {:.3e}: exponent drift {:.3e}, primal {:.3e}, dual {:.3e}, min halving ratio {}, {:.2} s",
                s.steps,
                s.step_size,
                s.max_exponent_drift,
                s.max_residuals.primal_max(),
                s.max_residuals.dual_max(),
                s.min_halving_ratio().map_or("n/a".to_string(), |r| format!("{r:.2}")),
                s.seconds
            );
            emit_text(&a.io.output, &report.to_csv())
        }
        Verb::Suite(a) => {
            let results = run_all(a.seed);
            for r in &results {
                println!("{}", r.line());
            }
            if let Some(p) = &a.output {
                let doc: Vec<Value> = results
                    .iter()
                    .map(|r| json!({ "id": r.id, "title": r.title, "passed": r.passed, "detail": r.detail, "seconds": r.seconds }))
                    .collect();
                emit(&Some(p.clone()), &doc)?;
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
                Err(Failure::Domain(Error::InvalidInput(format!("criteria failed: {}", failed.join(",")))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
