//! `hybrid`: train, apply and sweep hybrid interpretable/black-box models.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on a runtime failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_core::binarize::{binarize, DEFAULT_QUANTILES};
use hybrid_core::data::{load_for_prediction, split, Dataset, SplitSpec};
use hybrid_core::frontier::{evaluate, export_frontier, pareto, sweep_models, with_threads, FrontierPoint, SweepGrid};
use hybrid_core::linear::{apg_train, ApgConfig, LossKind, LossSpec, DEFAULT_MU};
use hybrid_core::model_io::{Model, ModelFile, ModelKind};
use hybrid_core::rules::{mine_candidates_with, MiningConfig, DEFAULT_MAX_POOL, DEFAULT_MAX_RULE_LEN};
use hybrid_core::ruleset::{train, SearchConfig};
use hybrid_core::{verify, Error};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "hybrid", version, about = "Hybrid interpretable/black-box classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List candidate rules mined from a dataset.
    Mine(MineArgs),
    /// Train a hybrid rule-set model.
    TrainRules(TrainRulesArgs),
    /// Train a hybrid two-threshold linear model.
    TrainLinear(TrainLinearArgs),
    /// Write predictions and routes for every row of a dataset.
    Predict(PredictArgs),
    /// Report transparency and accuracy of a model on labeled data.
    Evaluate(EvaluateArgs),
    /// Sweep (alpha1, alpha2) and write the transparency/accuracy frontier.
    Frontier(FrontierArgs),
    /// Run the built-in acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column holding the true label (-1/+1 or 0/1).
    #[arg(long)]
    label: String,
    /// Column holding the black-box prediction.
    #[arg(long)]
    blackbox: String,
}

#[derive(Args)]
struct Alphas {
    /// Weight of model complexity.
    #[arg(long)]
    alpha1: f64,
    /// Weight of transparency.
    #[arg(long)]
    alpha2: f64,
}

#[derive(Args)]
struct MiningArgs {
    /// Maximum conditions per rule.
    #[arg(long, default_value_t = DEFAULT_MAX_RULE_LEN)]
    max_len: usize,
    /// Maximum candidate rules kept per side.
    #[arg(long, default_value_t = DEFAULT_MAX_POOL)]
    max_pool: usize,
}

impl MiningArgs {
    fn config(&self) -> MiningConfig {
        MiningConfig {
            max_len: self.max_len,
            max_pool: self.max_pool,
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Annealing iterations per chain.
    #[arg(long, default_value_t = SearchConfig::default().iterations)]
    iterations: usize,
    /// Independent chains; the best result wins.
    #[arg(long, default_value_t = SearchConfig::default().restarts)]
    restarts: usize,
    /// Base temperature.
    #[arg(long, default_value_t = SearchConfig::default().c0)]
    c0: f64,
    /// Probability of a random rather than greedy rule choice.
    #[arg(long, default_value_t = SearchConfig::default().epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            iterations: self.iterations,
            restarts: self.restarts,
            c0: self.c0,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// hinge, smoothed_hinge or logistic.
    #[arg(long, default_value = "hinge")]
    loss: LossKind,
    /// Smoothing parameter for the hinge loss.
    #[arg(long, default_value_t = DEFAULT_MU)]
    mu: f64,
    #[arg(long, default_value_t = ApgConfig::default().max_iter)]
    max_iter: usize,
    /// Relative objective change that stops the solver.
    #[arg(long, default_value_t = ApgConfig::default().tol)]
    tol: f64,
}

impl SolverArgs {
    fn loss(&self) -> Result<LossSpec, Error> {
        let mu = if self.loss == LossKind::Hinge { self.mu } else { 0.0 };
        LossSpec::new(self.loss, mu)
    }

    fn config(&self) -> Result<ApgConfig, Error> {
        let cfg = ApgConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            ..ApgConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    alphas: Alphas,
    #[command(flatten)]
    mining: MiningArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRulesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    alphas: Alphas,
    #[command(flatten)]
    mining: MiningArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLinearArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    alphas: Alphas,
    #[command(flatten)]
    solver: SolverArgs,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Black-box column; defaults to the one the model was trained with.
    #[arg(long)]
    blackbox: Option<String>,
    /// Prediction CSV (`row,label,route`); standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column; defaults to the one the model was trained with.
    #[arg(long)]
    label: Option<String>,
    /// Black-box column; defaults to the one the model was trained with.
    #[arg(long)]
    blackbox: Option<String>,
}

#[derive(Args)]
struct FrontierArgs {
    /// Training CSV, or the whole dataset when --test is omitted.
    #[arg(long)]
    data: PathBuf,
    /// Held-out CSV; without it --data is split.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    label: String,
    #[arg(long)]
    blackbox: String,
    /// rules or linear.
    #[arg(long, default_value = "rules")]
    kind: ModelKind,
    /// Comma-separated alpha1 grid.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha1: Vec<f64>,
    /// Comma-separated alpha2 grid.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha2: Vec<f64>,
    /// Training share when splitting --data.
    #[arg(long, default_value_t = SplitSpec::default().train_fraction)]
    train_fraction: f64,
    #[command(flatten)]
    mining: MiningArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Keep only Pareto-efficient points.
    #[arg(long)]
    pareto: bool,
    /// Directory that receives one model file per successful cell.
    #[arg(long)]
    models_dir: Option<PathBuf>,
    /// Frontier CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single criterion (1 to 10).
    #[arg(long)]
    criterion: Option<u8>,
}

/// Failure of a command, mapped to an exit code.
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

type CmdResult = Result<(), Failure>;

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> CmdResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{}: no such directory", path.display())))
    }
}

fn require_parent(path: &Path) -> CmdResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => require_dir(p),
        _ => Ok(()),
    }
}

fn check_alphas(a: &Alphas) -> CmdResult {
    if !(a.alpha1.is_finite() && a.alpha1 >= 0.0) {
        return Err(Failure::Invalid(format!(
            "--alpha1 must be finite and >= 0, got {}",
            a.alpha1
        )));
    }
    if !(a.alpha2.is_finite() && a.alpha2 >= 0.0) {
        return Err(Failure::Invalid(format!(
            "--alpha2 must be finite and >= 0, got {}",
            a.alpha2
        )));
    }
    Ok(())
}

/// Opens `path`, or standard output when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_failure(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn finish(mut out: Box<dyn Write>, path: Option<&Path>) -> CmdResult {
    out.flush()
        .map_err(|e| io_failure(path.unwrap_or(Path::new("<stdout>")), e))
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    Ok(Dataset::load(&args.data, &args.label, &args.blackbox)?)
}

fn mine(a: MineArgs) -> CmdResult {
    require_file(&a.data.data)?;
    check_alphas(&a.alphas)?;
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    let d = load(&a.data)?;
    let binary = binarize(&d, &DEFAULT_QUANTILES)?;
    let pool = mine_candidates_with(&binary, &a.mining.config(), a.alphas.alpha1, a.alphas.alpha2)?;
    eprintln!(
        "{} positive and {} negative candidates (minimum support {} / {})",
        pool.positive.len(),
        pool.negative.len(),
        pool.min_support_pos,
        pool.min_support_neg
    );
    let mut out = output(a.out.as_deref())?;
    pool.dump(&mut out)
        .map_err(|e| io_failure(a.out.as_deref().unwrap_or(Path::new("<stdout>")), e))?;
    finish(out, a.out.as_deref())
}

fn train_rules(a: TrainRulesArgs) -> CmdResult {
    require_file(&a.data.data)?;
    check_alphas(&a.alphas)?;
    require_parent(&a.out)?;
    let cfg = a.search.config();
    eprintln!("seed {}", cfg.seed);
    let d = load(&a.data)?;
    let binary = binarize(&d, &DEFAULT_QUANTILES)?;
    let (a1, a2) = (a.alphas.alpha1, a.alphas.alpha2);
    let pool = mine_candidates_with(&binary, &a.mining.config(), a1, a2)?;
    let model = with_threads(1, || train(&binary, &pool, a1, a2, &cfg))??;
    eprintln!(
        "{} positive and {} negative rules, objective {:.6}",
        model.pair.positive.len(),
        model.pair.negative.len(),
        model.training_objective
    );
    ModelFile::new(Model::Rules(model), &a.data.label, &a.data.blackbox, Some(cfg.seed)).save(&a.out)?;
    Ok(())
}

fn train_linear(a: TrainLinearArgs) -> CmdResult {
    require_file(&a.data.data)?;
    check_alphas(&a.alphas)?;
    require_parent(&a.out)?;
    let spec = a.solver.loss()?;
    let cfg = a.solver.config()?;
    let d = load(&a.data)?;
    let model = apg_train(&d, a.alphas.alpha1, a.alphas.alpha2, &spec, &cfg)?;
    eprintln!(
        "{} nonzero coefficients, thresholds [{:.6}, {:.6}], objective {:.6}",
        model.complexity(),
        model.theta_minus,
        model.theta_plus,
        model.objective
    );
    ModelFile::new(Model::Linear(model), &a.data.label, &a.data.blackbox, None).save(&a.out)?;
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    require_file(&a.model)?;
    require_file(&a.data)?;
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    let file = ModelFile::load(&a.model)?;
    let bb_column = a.blackbox.as_deref().unwrap_or(&file.blackbox_column);
    let reader = File::open(&a.data).map_err(|e| io_failure(&a.data, e))?;
    let (table, blackbox) = load_for_prediction(reader, bb_column, &[file.label_column.as_str()])?;
    let mut rows = Vec::with_capacity(table.n());
    for (i, &yb) in blackbox.iter().enumerate() {
        rows.push(file.model.predict(&table.row(i), yb)?);
    }
    let mut out = output(a.out.as_deref())?;
    let target = a.out.as_deref().unwrap_or(Path::new("<stdout>"));
    let mut write = || -> io::Result<()> {
        writeln!(out, "row,label,route")?;
        for (i, (label, route)) in rows.iter().enumerate() {
            writeln!(out, "{},{label},{route}", i + 1)?;
        }
        Ok(())
    };
    write().map_err(|e| io_failure(target, e))?;
    finish(out, a.out.as_deref())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn evaluate_cmd(a: EvaluateArgs) -> CmdResult {
    require_file(&a.model)?;
    require_file(&a.data)?;
    let file = ModelFile::load(&a.model)?;
    let label = a.label.as_deref().unwrap_or(&file.label_column);
    let bb = a.blackbox.as_deref().unwrap_or(&file.blackbox_column);
    let d = Dataset::load(&a.data, label, bb)?;
    let p = evaluate(&file.model, &d)?;
    println!("kind: {}", p.kind);
    println!("rows: {}", d.n());
    println!("transparency: {:.6}", p.transparency);
    println!("accuracy: {:.6}", p.accuracy);
    println!("complexity: {}", p.complexity);
    println!("interpretable_accuracy: {}", fmt_opt(p.interpretable_accuracy));
    println!("blackbox_route_accuracy: {}", fmt_opt(p.blackbox_accuracy));
    println!("blackbox_only_accuracy: {:.6}", d.blackbox_accuracy());
    Ok(())
}

fn model_file_name(kind: ModelKind, index: usize, a1: f64, a2: f64) -> String {
    format!("{kind}-{index:03}-a1_{a1}-a2_{a2}.json")
}

fn frontier(a: FrontierArgs) -> CmdResult {
    require_file(&a.data)?;
    if let Some(t) = &a.test {
        require_file(t)?;
    }
    if let Some(dir) = &a.models_dir {
        require_dir(dir)?;
    }
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    if a.jobs == 0 {
        return Err(Failure::Invalid("--jobs must be at least 1".into()));
    }
    let mut grid = SweepGrid::new(a.alpha1.clone(), a.alpha2.clone());
    grid.validate()?;
    grid.rules.mining = a.mining.config();
    grid.rules.search = a.search.config();
    grid.linear.loss = a.solver.loss()?;
    grid.linear.apg = a.solver.config()?;
    eprintln!("seed {}", a.search.seed);

    let (train_set, test) = match &a.test {
        Some(t) => (
            Dataset::load(&a.data, &a.label, &a.blackbox)?,
            Dataset::load(t, &a.label, &a.blackbox)?,
        ),
        None => {
            let all = Dataset::load(&a.data, &a.label, &a.blackbox)?;
            split(
                &all,
                SplitSpec {
                    train_fraction: a.train_fraction,
                    seed: a.search.seed,
                },
            )?
        }
    };
    let cells = sweep_models(&train_set, &test, &grid, a.kind, a.search.seed, a.jobs)?;
    let mut points: Vec<FrontierPoint> = Vec::with_capacity(cells.len());
    for (i, cell) in cells.into_iter().enumerate() {
        let mut point = cell.point;
        if let Some(msg) = &point.failure {
            eprintln!("cell alpha1={} alpha2={} failed: {msg}", point.alpha1, point.alpha2);
        }
        if let (Some(dir), Some(model)) = (&a.models_dir, cell.model) {
            let name = model_file_name(a.kind, i, point.alpha1, point.alpha2);
            let path = dir.join(&name);
            let seed = (a.kind == ModelKind::Rules).then_some(a.search.seed);
            ModelFile::new(model, &a.label, &a.blackbox, seed).save(&path)?;
            point.model_path = Some(path.to_string_lossy().into_owned());
        }
        points.push(point);
    }
    if a.pareto {
        points = pareto(&points);
    }
    let out = output(a.out.as_deref())?;
    export_frontier(&points, out)?;
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> CmdResult {
    let reports = match a.criterion {
        Some(id) => vec![verify::run(id)?],
        None => verify::run_all(),
    };
    let mut failed = 0;
    for r in &reports {
        println!("{r}");
        failed += !r.passed as usize;
    }
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{failed} criteria failed")))
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Mine(a) => mine(a),
        Command::TrainRules(a) => train_rules(a),
        Command::TrainLinear(a) => train_linear(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Frontier(a) => frontier(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
