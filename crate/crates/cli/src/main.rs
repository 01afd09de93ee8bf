use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use solgraph::dot::export_dot;
use solgraph::groundset::GroundManifold;
use solgraph::metrics::{self, FairnessReport};
use solgraph::nqueens;
use solgraph::oracle;
use solgraph::perturb::{self, OrderPolicy};
use solgraph::sqa::{self, SqaConfig};
use solgraph::transforms::{self, EltipRule, Embedding};
use solgraph::{DriverSpec, Error, ErrorClass, IsingModel, SpinConfig};

#[derive(Parser)]
#[command(
    name = "solgraph",
    version,
    about = "Solution-graph analysis of degenerate ground-state sampling"
)]
struct Cli {
    /// Seed for every stochastic command.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted probabilities (optionally with an oracle and a parameter sweep).
    #[command(alias = "sweep")]
    Analyze(AnalyzeArgs),
    /// Cross-checks the prediction against both exact oracles.
    Verify(VerifyArgs),
    /// Maps a logical model onto physical qubits.
    Embed(EmbedArgs),
    /// Applies the energy-landscape transformation at one spin.
    Eltip(EltipArgs),
    /// N-Queens instances, solutions and landscape triples.
    Nqueens(NqueensArgs),
    /// Simulated quantum annealing tallies.
    Sqa(SqaArgs),
    /// Graphviz rendering of the solution graph.
    ExportDot(DotArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model JSON file.
    model: PathBuf,
    /// `tf`, `tf+pairs` or a driver JSON file.
    #[arg(long, default_value = "tf")]
    driver: String,
    /// Absolute ground-energy tolerance (default 1e-9·max(1, |E₀|)).
    #[arg(long)]
    tol: Option<f64>,
    /// Parameter binding `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// auto, first or second.
    #[arg(long, default_value = "auto")]
    order: OrderPolicy,
    /// quasistatic or schrodinger.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long, default_value_t = oracle::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 500.0)]
    tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// `name=start:stop:steps`, inclusive of both ends.
    #[arg(long)]
    sweep: Option<String>,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = oracle::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 500.0)]
    tau: f64,
    #[arg(long, default_value_t = 1e-2)]
    dt: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    model: PathBuf,
    embedding: PathBuf,
    /// Chain strength; without it the output keeps `$J_F` as a parameter.
    #[arg(long)]
    chain_strength: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EltipArgs {
    model: PathBuf,
    /// 0-based spin index.
    #[arg(long)]
    spin: usize,
    /// gauge or field-swap.
    #[arg(long, default_value = "gauge")]
    rule: EltipRule,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NqueensArgs {
    #[arg(long)]
    n: usize,
    /// Writes the penalty model JSON.
    #[arg(long)]
    emit: Option<PathBuf>,
    /// Writes the solution states as a targets file for `sqa`.
    #[arg(long)]
    emit_targets: Option<PathBuf>,
    #[arg(long)]
    list_solutions: bool,
    #[arg(long)]
    triples: bool,
}

#[derive(Args)]
struct SqaArgs {
    model: PathBuf,
    /// JSON array of target bit strings.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma_start: Option<f64>,
    #[arg(long)]
    gamma_end: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "auto")]
    order: OrderPolicy,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A library error with the command context that produced it.
struct Failure {
    class: ErrorClass,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            class: ErrorClass::Input,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, Failure>;
}

impl<T> Context<T> for solgraph::Result<T> {
    fn context(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("{what}: {}", f.message);
            f
        })
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::input(format!("writing {}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn parse_binding(s: &str) -> Result<(String, &str), Failure> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| Failure::input(format!("expected NAME=VALUE, got {s:?}")))?;
    Ok((
        name.trim().trim_start_matches('$').to_string(),
        value.trim(),
    ))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.parse()
        .map_err(|_| Failure::input(format!("{what}: {s:?} is not a number")))
}

fn load_model(args: &ModelArgs) -> Result<IsingModel, Failure> {
    let model = IsingModel::load(&args.model).context("loading model")?;
    let mut bindings = BTreeMap::new();
    for b in &args.params {
        let (name, value) = parse_binding(b)?;
        if !model.param_names().contains(&name) {
            return Err(Failure::input(format!(
                "--param {name}: the model has no such parameter"
            )));
        }
        bindings.insert(name, parse_f64(value, "--param")?);
    }
    let mut params = model.params().clone();
    params.extend(bindings);
    Ok(model.with_params(params))
}

fn load_driver(spec: &str, num_spins: usize) -> Result<DriverSpec, Failure> {
    match spec {
        "tf" | "tf+pairs" => DriverSpec::from_shorthand(spec, num_spins).context("driver"),
        path => {
            let d = DriverSpec::load(path).context("loading driver")?;
            if d.num_spins() != num_spins {
                return Err(Failure::input(format!(
                    "driver acts on {} spins, model has {num_spins}",
                    d.num_spins()
                )));
            }
            Ok(d)
        }
    }
}

struct Sweep {
    name: String,
    values: Vec<f64>,
}

fn parse_sweep(spec: &str, model: &IsingModel) -> Result<Sweep, Failure> {
    let (name, range) = parse_binding(spec)?;
    if !model.param_names().contains(&name) {
        return Err(Failure::input(format!(
            "--sweep {name}: the model has no such parameter"
        )));
    }
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, steps] = parts[..] else {
        return Err(Failure::input(format!(
            "--sweep expects name=start:stop:steps, got {spec:?}"
        )));
    };
    let (start, stop) = (parse_f64(start, "--sweep")?, parse_f64(stop, "--sweep")?);
    let steps: usize = steps
        .parse()
        .map_err(|_| Failure::input(format!("--sweep steps {steps:?} is not an integer")))?;
    if steps < 2 {
        return Err(Failure::input("--sweep needs at least 2 steps"));
    }
    let values = (0..steps)
        .map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64)
        .collect();
    Ok(Sweep { name, values })
}

struct Analysis {
    report: FairnessReport,
    dot: String,
}

fn analyze_point(
    template: &IsingModel,
    bindings: &BTreeMap<String, f64>,
    args: &AnalyzeArgs,
) -> Result<Analysis, Failure> {
    let model = template
        .substitute(bindings)
        .context("binding parameters")?;
    let n = model.num_spins();
    let driver = load_driver(&args.model.driver, n)?;
    let manifold = GroundManifold::enumerate(&model, args.model.tol).context("ground manifold")?;
    let graph =
        perturb::resolve(&model, &manifold, &driver, args.order).context("solution graph")?;
    let mut report = metrics::predicted_probabilities(&graph).context("centrality")?;
    report.settings.driver = Some(args.model.driver.clone());
    report.settings.order_policy = Some(format!("{:?}", args.order).to_lowercase());
    match args.oracle.as_deref() {
        None => {}
        Some("quasistatic") => {
            let r = oracle::quasistatic(&model, &driver, &manifold, args.lambda)
                .context("quasi-static oracle")?;
            report.attach_oracle(r)?;
        }
        Some("schrodinger") => {
            let r = oracle::adiabatic(&model, &driver, &manifold, args.tau, args.dt)
                .context("adiabatic oracle")?;
            report.attach_oracle(r)?;
        }
        Some(other) => {
            return Err(Failure::input(format!(
                "--oracle must be quasistatic or schrodinger, got {other:?}"
            )))
        }
    }
    Ok(Analysis {
        report,
        dot: export_dot(&graph),
    })
}

fn write_csv(
    path: &Path,
    key: Option<(&str, &[f64])>,
    reports: &[FairnessReport],
) -> Result<(), Failure> {
    let file = fs::File::create(path)
        .map_err(|e| Failure::input(format!("writing {}: {e}", path.display())))?;
    metrics::write_csv_rows(file, key, reports).context("writing CSV")
}

fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let template = load_model(&args.model)?;
    let Some(spec) = &args.sweep else {
        let a = analyze_point(&template, &BTreeMap::new(), args)?;
        if let Some(p) = &args.csv {
            write_csv(p, None, std::slice::from_ref(&a.report))?;
        }
        if let Some(p) = &args.dot {
            write_out(Some(p), &a.dot)?;
        }
        return write_out(args.out.as_deref(), &a.report.to_json_string());
    };
    let sweep = parse_sweep(spec, &template)?;
    let points: Vec<Analysis> = sweep
        .values
        .par_iter()
        .map(|&v| {
            let bindings = BTreeMap::from([(sweep.name.clone(), v)]);
            analyze_point(&template, &bindings, args).map_err(|mut f| {
                f.message = format!("{}={v}: {}", sweep.name, f.message);
                f
            })
        })
        .collect::<Result<_, _>>()?;
    let reports: Vec<FairnessReport> = points.into_iter().map(|a| a.report).collect();
    if let Some(p) = &args.csv {
        write_csv(p, Some((&sweep.name, &sweep.values)), &reports)?;
    }
    let combined: Vec<_> = sweep
        .values
        .iter()
        .zip(&reports)
        .map(|(v, r)| json!({ "param": sweep.name, "value": v, "report": r }))
        .collect();
    let text = serde_json::to_string_pretty(&combined).expect("reports serialize");
    write_out(args.out.as_deref(), &text)
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?
        .resolve()
        .context("binding parameters")?;
    let driver = load_driver(&args.model.driver, model.num_spins())?;
    let manifold = GroundManifold::enumerate(&model, args.model.tol).context("ground manifold")?;
    let cv = oracle::cross_validate(&model, &driver, &manifold, args.lambda, args.tau, args.dt)
        .context("cross-validation")?;
    let text = serde_json::to_string_pretty(&cv).expect("cross-validation serializes");
    write_out(args.out.as_deref(), &text)
}

fn embed(args: &EmbedArgs) -> Result<(), Failure> {
    let model = IsingModel::load(&args.model).context("loading model")?;
    let emb = Embedding::load(&args.embedding).context("loading embedding")?;
    let out = match args.chain_strength {
        Some(j) => transforms::embed(&model, &emb, j),
        None => transforms::embed_template(&model, &emb),
    }
    .context("embedding")?;
    write_out(
        args.out.as_deref(),
        &out.to_json_string().context("serializing model")?,
    )
}

fn eltip(args: &EltipArgs) -> Result<(), Failure> {
    let model = IsingModel::load(&args.model).context("loading model")?;
    let out = transforms::eltip(&model, args.spin, args.rule).context("ELTIP")?;
    write_out(
        args.out.as_deref(),
        &out.to_json_string().context("serializing model")?,
    )
}

fn nqueens_cmd(args: &NqueensArgs) -> Result<(), Failure> {
    let n = args.n;
    if let Some(p) = &args.emit {
        let inst = nqueens::build(n).context("building N-Queens model")?;
        write_out(
            Some(p),
            &inst.model.to_json_string().context("serializing model")?,
        )?;
    }
    let sols = nqueens::enumerate_solutions(n).context("enumerating solutions")?;
    if let Some(p) = &args.emit_targets {
        let mut states: Vec<SpinConfig> = sols
            .iter()
            .map(|s| nqueens::placement_config(s, n))
            .collect();
        states.sort();
        let labels: Vec<String> = states.iter().map(|s| s.label(n * n)).collect();
        write_out(
            Some(p),
            &serde_json::to_string_pretty(&labels).expect("labels serialize"),
        )?;
    }
    let families = nqueens::group_families(&sols);
    let mut summary = json!({
        "n": n,
        "solutions": sols.len(),
        "families": families.len(),
    });
    if args.list_solutions {
        summary["family_list"] = json!(families);
    }
    if args.triples {
        let triples = families
            .iter()
            .map(|f| {
                let (a, b, c) = nqueens::landscape_triple(&f.fundamental)?;
                Ok(json!({ "fundamental": f.fundamental, "variants": f.variants.len(), "triple": [a, b, c] }))
            })
            .collect::<solgraph::Result<Vec<_>>>()
            .context("landscape triples")?;
        summary["triples"] = json!(triples);
    }
    write_out(
        None,
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
}

fn sqa_cmd(args: &SqaArgs, seed: u64) -> Result<(), Failure> {
    let model = IsingModel::load(&args.model)
        .and_then(|m| m.resolve())
        .context("loading model")?;
    let text = fs::read_to_string(&args.targets)
        .map_err(|e| Failure::input(format!("reading {}: {e}", args.targets.display())))?;
    let labels: Vec<String> = serde_json::from_str(&text).map_err(|e| {
        Failure::input(format!(
            "targets: expected a JSON array of bit strings ({e})"
        ))
    })?;
    let mut targets = Vec::with_capacity(labels.len());
    for l in &labels {
        let s = SpinConfig::parse(l).context("targets")?;
        if l.chars().count() != model.num_spins() {
            return Err(Failure::input(format!(
                "target {l:?} does not have {} spins",
                model.num_spins()
            )));
        }
        targets.push(s);
    }
    targets.sort();
    targets.dedup();
    let d = SqaConfig::default();
    let cfg = SqaConfig {
        trotter_slices: args.slices.unwrap_or(d.trotter_slices),
        beta: args.beta.unwrap_or(d.beta),
        gamma_start: args.gamma_start.unwrap_or(d.gamma_start),
        gamma_end: args.gamma_end.unwrap_or(d.gamma_end),
        sweeps: args.sweeps.unwrap_or(d.sweeps),
        samples: args.samples.unwrap_or(d.samples),
        runs: args.runs.unwrap_or(d.runs),
        seed,
    };
    let tally = sqa::run_experiment(&model, &targets, &cfg).context("SQA")?;
    write_out(args.out.as_deref(), &tally.to_json_string())
}

fn dot_cmd(args: &DotArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?
        .resolve()
        .context("binding parameters")?;
    let driver = load_driver(&args.model.driver, model.num_spins())?;
    let manifold = GroundManifold::enumerate(&model, args.model.tol).context("ground manifold")?;
    let graph =
        perturb::resolve(&model, &manifold, &driver, args.order).context("solution graph")?;
    write_out(args.out.as_deref(), &export_dot(&graph))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Verify(a) => verify(a),
        Command::Embed(a) => embed(a),
        Command::Eltip(a) => eltip(a),
        Command::Nqueens(a) => nqueens_cmd(a),
        Command::Sqa(a) => sqa_cmd(a, cli.seed),
        Command::ExportDot(a) => dot_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(match f.class {
                ErrorClass::Input => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Capacity => 4,
            })
        }
    }
}
