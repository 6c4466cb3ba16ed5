//! Command-line front end.
//!
//! Every artifact is written in nats; `--units bits` only changes what is
//! printed. CSV files begin with a `# generated:` line followed by a schema line,
//! so reruns with the same configuration differ only in that first line.

use std::f64::consts::LN_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregator_traces, max_mixability_eta, mixability_test_eta, verify_superloss_trace, ExpertDescriptor,
    PoolDescriptor, DEFAULT_CONCAVITY_TOL,
};
use crate::entropy::{
    conditional_entropies, conditional_entropy_direct, default_tolerance, entropy_rate, n_step_entropy,
};
use crate::games::Game;
use crate::simulation::{
    predictive_rate_experiment, smb_experiment, ConvergenceResult, ExperimentSpec, GameSpec, StrategySpec,
    TwoSidedReport,
};
use crate::sources::{SourceDescriptor, SourceModel};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_061_999;
pub const SEED_ENV: &str = "ENTROGAME_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "entrogame", version, about = "Generalized entropy and predictive complexity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Game: logloss, sqloss, absloss, or a JSON loss-table file.
    #[arg(long, global = true)]
    pub game: Option<String>,
    /// Source descriptor JSON file.
    #[arg(long, global = true)]
    pub source: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Display units; artifacts are always stored in nats.
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact conditional entropies and the entropy-rate estimate.
    Entropy {
        #[arg(long)]
        n_cap: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Loss rate of the pointwise optimal strategy on sampled paths.
    Smb(ExperimentArgs),
    /// Curvature test over a grid of learning rates.
    Mixability {
        #[arg(long)]
        eta_grid: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Loss rate of the aggregating strategy over an expert pool.
    Aggregate {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Pool descriptor JSON file; defaults to the order-0..2 grid pool.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Runs the invariant suite and writes a pass/fail table.
    Verify {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Comma-separated checkpoint list.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Entropy,
    Smb,
    Mixability,
    Aggregate,
    Verify,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub game: Option<GameSpec>,
    pub source: Option<SourceDescriptor>,
    pub pool: Option<PoolDescriptor>,
    pub n: Option<usize>,
    pub paths: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub n_cap: Option<usize>,
    pub tol: Option<f64>,
    pub eta: Option<f64>,
    pub eta_grid: Option<usize>,
    pub resolution: Option<usize>,
    pub quick: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub units: Units,
    pub threads: Option<usize>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parses JSON from `path`, anchoring errors at `file:line:column`.
fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

fn parse_game(arg: &str) -> Result<GameSpec> {
    if matches!(arg, "logloss" | "sqloss" | "absloss") {
        Ok(GameSpec::Named(arg.into()))
    } else if Path::new(arg).is_file() {
        parse_json(Path::new(arg))
    } else {
        Err(Error::Config(format!("unknown game {arg:?}; expected logloss, sqloss, absloss or a JSON file")))
    }
}

impl RunConfig {
    /// Merges the optional `--config` file with command-line flags.
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let mut cfg: RunConfig = match &cli.common.config {
            Some(path) => parse_json(path)?,
            None => RunConfig::default(),
        };
        let c = cli.common;
        if let Some(g) = c.game {
            cfg.game = Some(parse_game(&g)?);
        }
        if let Some(s) = c.source {
            cfg.source = Some(parse_json(&s)?);
        }
        cfg.out = c.out.or(cfg.out);
        cfg.seed = c.seed.or(cfg.seed);
        cfg.units = c.units.unwrap_or(cfg.units);
        cfg.threads = c.threads.or(cfg.threads);
        let experiment = |cfg: &mut RunConfig, e: ExperimentArgs| {
            cfg.n = e.n.or(cfg.n);
            cfg.paths = e.paths.or(cfg.paths);
            cfg.checkpoints = e.checkpoints.or(cfg.checkpoints.take());
        };
        match cli.command {
            Command::Entropy { n_cap, tol } => {
                cfg.command = Some(CommandKind::Entropy);
                cfg.n_cap = n_cap.or(cfg.n_cap);
                cfg.tol = tol.or(cfg.tol);
            }
            Command::Smb(e) => {
                cfg.command = Some(CommandKind::Smb);
                experiment(&mut cfg, e);
            }
            Command::Mixability { eta_grid, resolution } => {
                cfg.command = Some(CommandKind::Mixability);
                cfg.eta_grid = eta_grid.or(cfg.eta_grid);
                cfg.resolution = resolution.or(cfg.resolution);
            }
            Command::Aggregate { experiment: e, pool, eta } => {
                cfg.command = Some(CommandKind::Aggregate);
                experiment(&mut cfg, e);
                if let Some(p) = pool {
                    cfg.pool = Some(parse_json(&p)?);
                }
                cfg.eta = eta.or(cfg.eta);
            }
            Command::Verify { quick } => {
                cfg.command = Some(CommandKind::Verify);
                cfg.quick |= quick;
            }
        }
        Ok(cfg)
    }

    fn game(&self) -> Result<Game> {
        self.game.as_ref().map_or_else(|| Err(Error::Config("--game is required".into())), GameSpec::build)
    }

    fn source_descriptor(&self) -> Result<SourceDescriptor> {
        self.source.clone().ok_or_else(|| Error::Config("--source is required".into()))
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn display(&self, nats: f64) -> String {
        match self.units {
            Units::Nats => format!("{nats:.9} nats"),
            Units::Bits => format!("{:.9} bits", nats / LN_2),
        }
    }

    fn experiment_spec(&self, strategy: StrategySpec) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            game: self.game.clone().ok_or_else(|| Error::Config("--game is required".into()))?,
            source: self.source_descriptor()?,
            strategy,
            n: self.n.unwrap_or(100_000),
            paths: self.paths.unwrap_or(20),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            checkpoints: self.checkpoints.clone().unwrap_or_default(),
        })
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_precondition() {
        EXIT_PRECONDITION
    } else if matches!(err, Error::InvariantViolation(_)) {
        EXIT_INVARIANT
    } else {
        EXIT_CONFIG
    }
}

/// Writes a CSV artifact with a leading timestamp line.
fn write_csv(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut buf = format!("# generated: unix={stamp}\n").into_bytes();
    body(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn write_json(path: &Path, schema: &str, value: &impl Serialize) -> Result<()> {
    let doc = serde_json::json!({ "schema": schema, "result": value });
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Outcome of a successful run: the exit code and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub code: i32,
    pub artifacts: Vec<PathBuf>,
}

/// Executes `cfg`, writing artifacts under its output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<RunOutcome> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    let mut artifacts = Vec::new();
    let mut code = EXIT_OK;
    match cfg.command.ok_or_else(|| Error::Config("no command given".into()))? {
        CommandKind::Entropy => {
            let game = cfg.game()?;
            let source = SourceModel::from_descriptor(&cfg.source_descriptor()?)?;
            let tol = cfg.tol.unwrap_or_else(|| default_tolerance(&source));
            let report = entropy_rate(&game, &source, tol, cfg.n_cap.unwrap_or(20))?;
            let csv = out.join("entropy.csv");
            write_csv(&csv, |b| report.write_csv(b))?;
            let json = out.join("entropy.json");
            write_json(&json, "entrogame/entropy-json/v1", &report)?;
            println!("rate estimate: {}", cfg.display(report.rate_estimate));
            println!("converged_at: {:?}", report.converged_at);
            artifacts.extend([csv, json]);
        }
        CommandKind::Smb => {
            let result = smb_experiment(&cfg.experiment_spec(StrategySpec::Optimal)?)?;
            artifacts.extend(write_convergence(cfg, &out, "smb", &result)?);
        }
        CommandKind::Aggregate => {
            let game = cfg.game()?;
            let pool = match &cfg.pool {
                Some(p) => PoolDescriptor { eta: cfg.eta.unwrap_or(p.eta), ..p.clone() },
                None => PoolDescriptor::default_pool(2, &[0.3, 0.7], cfg.eta.map_or_else(|| default_eta(&game), Ok)?),
            };
            let result = predictive_rate_experiment(&cfg.experiment_spec(StrategySpec::Pool(pool))?)?;
            artifacts.extend(write_convergence(cfg, &out, "aggregate", &result)?);
            let report = TwoSidedReport::from_result(&result)?;
            let path = out.join("rate_report.csv");
            write_csv(&path, |b| report.write_csv(b))?;
            artifacts.push(path);
            let valid = result.diagnostics.iter().all(|d| d.superloss_valid && d.bound_held);
            println!("superloss traces valid on every path: {valid}");
            if !valid {
                code = EXIT_INVARIANT;
            }
        }
        CommandKind::Mixability => {
            let game = cfg.game()?;
            let grid = cfg.eta_grid.unwrap_or(50).max(1);
            let resolution = cfg.resolution.unwrap_or(10_000);
            let rows = eta_grid(grid)
                .into_iter()
                .map(|eta| mixability_test_eta(&game, eta, resolution, DEFAULT_CONCAVITY_TOL))
                .collect::<Result<Vec<_>>>()?;
            let eta_star = max_mixability_eta(&game, resolution, 1e-4)?;
            let csv = out.join("mixability.csv");
            write_csv(&csv, |b| {
                use std::io::Write;
                writeln!(b, "# schema: entrogame/mixability-csv/v1")?;
                writeln!(b, "eta,beta,mixable,max_concavity_violation")?;
                for r in &rows {
                    writeln!(b, "{},{},{},{}", r.eta, r.beta, r.mixable, r.max_concavity_violation)?;
                }
                Ok(())
            })?;
            let json = out.join("mixability.json");
            write_json(
                &json,
                "entrogame/mixability-json/v1",
                &serde_json::json!({ "game": game.name(), "resolution": resolution, "eta_star": eta_star, "rows": rows }),
            )?;
            match eta_star {
                Some(e) => println!("largest mixable eta: {e:.4}"),
                None => println!("not mixable for any eta in the searched range"),
            }
            artifacts.extend([csv, json]);
        }
        CommandKind::Verify => {
            let rows = verify_suite(cfg.quick, cfg.seed.unwrap_or(DEFAULT_SEED));
            let csv = out.join("verify.csv");
            write_csv(&csv, |b| {
                use std::io::Write;
                writeln!(b, "# schema: entrogame/verify-csv/v1")?;
                writeln!(b, "group,check,status,detail")?;
                for r in &rows {
                    let status = if r.passed { "pass" } else { "fail" };
                    writeln!(b, "{},{},{},{}", r.group, r.check, status, r.detail.replace(',', ";"))?;
                }
                Ok(())
            })?;
            for r in &rows {
                println!("{:<20} {:<44} {}", r.group, r.check, if r.passed { "pass" } else { "FAIL" });
            }
            if rows.iter().any(|r| !r.passed) {
                code = EXIT_INVARIANT;
            }
            artifacts.push(csv);
        }
    }
    Ok(RunOutcome { code, artifacts })
}

/// `n` evenly spaced learning rates on `[0.1, 5]`.
pub fn eta_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.1];
    }
    (0..n).map(|i| 0.1 + 4.9 * i as f64 / (n - 1) as f64).collect()
}

fn default_eta(game: &Game) -> Result<f64> {
    match game.name() {
        "logloss" => Ok(1.0),
        "sqloss" => Ok(2.0),
        _ => max_mixability_eta(game, 2001, 1e-4)?.ok_or(Error::NotMixable(f64::NAN)),
    }
}

fn write_convergence(cfg: &RunConfig, out: &Path, stem: &str, result: &ConvergenceResult) -> Result<Vec<PathBuf>> {
    let csv = out.join(format!("{stem}.csv"));
    write_csv(&csv, |b| result.write_csv(b))?;
    let json = out.join(format!("{stem}.json"));
    write_json(&json, "entrogame/convergence-json/v1", result)?;
    println!(
        "final mean rate: {}  target: {}  |deviation|: {}",
        cfg.display(*result.mean.last().expect("at least one checkpoint")),
        cfg.display(result.target_h),
        cfg.display(result.final_deviation)
    );
    Ok(vec![csv, json])
}

/// One line of the `verify` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub group: &'static str,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn check(group: &'static str, name: impl Into<String>, outcome: Result<(bool, String)>) -> CheckRow {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
    CheckRow { group, check: name.into(), passed, detail }
}

fn suite_sources() -> Vec<(&'static str, SourceModel)> {
    vec![
        ("bernoulli(0.3)", SourceModel::bernoulli(0.3).expect("valid")),
        ("markov(q=0.2)", SourceModel::symmetric_markov(0.2).expect("valid")),
        (
            "hmm(2)",
            SourceModel::hidden_markov(vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![0.1, 0.8]).expect("valid"),
        ),
    ]
}

/// The invariant suite behind `verify`. `quick` shortens horizons and
/// sample counts.
pub fn verify_suite(quick: bool, seed: u64) -> Vec<CheckRow> {
    let games = [Game::log_loss(), Game::square_loss(), Game::absolute_loss()];
    let sources = suite_sources();
    let horizon = if quick { 6 } else { 10 };
    let mut rows = Vec::new();

    for game in &games {
        for (label, source) in &sources {
            let tag = format!("{}/{label}", game.name());
            rows.push(check(
                "chain_rule",
                tag.clone(),
                (|| {
                    let mut worst: f64 = 0.0;
                    for total in 1..=horizon {
                        let h_total = n_step_entropy(game, source, total)?;
                        for m in 0..total {
                            let lhs = n_step_entropy(game, source, m)? + conditional_entropy_direct(game, source, total - m, m)?;
                            worst = worst.max((h_total - lhs).abs());
                        }
                    }
                    Ok((worst <= 1e-8, format!("max gap {worst:.2e}")))
                })(),
            ));
            let h = conditional_entropies(game, source, horizon);
            rows.push(check(
                "monotonicity",
                tag.clone(),
                h.as_ref().map_err(clone_err).map(|h| {
                    let worst = h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                    (worst <= 1e-9, format!("max increase {worst:.2e}"))
                }),
            ));
            rows.push(check(
                "shannon_inequality",
                tag.clone(),
                h.as_ref().map_err(clone_err).map(|h| {
                    let worst = h.iter().map(|x| x - h[0]).fold(f64::NEG_INFINITY, f64::max);
                    (worst <= 1e-9, format!("max excess over H_1 {worst:.2e}"))
                }),
            ));
        }
    }

    for (label, source) in &sources {
        rows.push(check(
            "stationarity",
            *label,
            (|| {
                let mut worst: f64 = 0.0;
                let depth = if quick { 5 } else { 8 };
                for len in 0..depth {
                    for code in 0..(1usize << len) {
                        let w: Vec<u8> = (0..len).map(|i| ((code >> (len - 1 - i)) & 1) as u8).collect();
                        let p = source.string_probability(&w)?;
                        let mut right = 0.0;
                        let mut left = 0.0;
                        for b in 0..2u8 {
                            let mut wr = w.clone();
                            wr.push(b);
                            right += source.string_probability(&wr)?;
                            let mut wl = vec![b];
                            wl.extend_from_slice(&w);
                            left += source.string_probability(&wl)?;
                        }
                        worst = worst.max((p - right).abs()).max((p - left).abs());
                    }
                }
                Ok((worst <= 1e-12, format!("max marginal gap {worst:.2e}")))
            })(),
        ));
    }

    let mix_cases = [(Game::log_loss(), 1.0, true), (Game::square_loss(), 2.0, true), (Game::absolute_loss(), 1.0, false)];
    for (game, eta, expected) in &mix_cases {
        rows.push(check(
            "mixability",
            format!("{}/eta={eta}", game.name()),
            mixability_test_eta(game, *eta, 10_000, DEFAULT_CONCAVITY_TOL)
                .map(|r| (r.mixable == *expected, format!("violation {:.2e}", r.max_concavity_violation))),
        ));
    }

    let markov = SourceModel::symmetric_markov(0.3).expect("valid");
    for (game, eta) in [(Game::log_loss(), 1.0), (Game::square_loss(), 2.0)] {
        rows.push(check(
            "superloss",
            format!("{}/aggregator trace", game.name()),
            (|| {
                let mut pool: Vec<ExpertDescriptor> =
                    (0..=10).map(|i| ExpertDescriptor::Constant { gamma: i as f64 / 10.0 }).collect();
                pool.push(ExpertDescriptor::markov(&markov)?);
                let mut state = PoolDescriptor { experts: pool, eta }.build(&game)?;
                let bits = markov.sample_path(if quick { 2_000 } else { 20_000 }, seed)?.bits;
                let (loss, mixture) = aggregator_traces(&mut state, &bits)?;
                let ok = verify_superloss_trace(&game, &loss, 1e-9)? && verify_superloss_trace(&game, &mixture, 1e-9)?;
                let gap = state.best_expert_loss() + (state.experts().len() as f64).ln() / eta
                    - loss.last_value().unwrap_or(0.0);
                Ok((ok && gap >= -1e-6, format!("bound slack {gap:.3e}")))
            })(),
        ));
    }

    rows.push(check(
        "smb",
        "logloss/markov(q=0.3)",
        (|| {
            let source = markov.descriptor();
            let (n, paths) = if quick { (10_000, 4) } else { (100_000, 20) };
            let spec = ExperimentSpec::new("logloss", source, StrategySpec::Optimal, n, paths, seed);
            let result = smb_experiment(&spec)?;
            let tol = if quick { 0.03 } else { 0.01 };
            Ok((result.final_deviation <= tol, format!("|mean rate - H| = {:.2e}", result.final_deviation)))
        })(),
    ));
    rows
}

fn clone_err(e: &Error) -> Error {
    Error::Config(e.to_string())
}
