use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use wfa_irl::cost::{feature_dim, CostKind, CostModel};
use wfa_irl::demo::{load_demos, save_demos, Demonstration};
use wfa_irl::eval::{evaluate, EvalConfig};
use wfa_irl::expert::{default_failure_horizon, gen_failure, gen_success};
use wfa_irl::gridworld::TaskSpec;
use wfa_irl::hankel::ScoredWord;
use wfa_irl::irl::{save_trace, train, TrainConfig, DEFAULT_AGENT_ETA, DEFAULT_BATCH_SIZE, DEFAULT_GRAD_CLIP};
use wfa_irl::optim::OptimizerKind;
use wfa_irl::planner::Limits;
use wfa_irl::sweep::{fit, sweep, SpectralParams, SweepRanges};
use wfa_irl::word::Word;
use wfa_irl::{CostModel64, Wfa64};

#[derive(Parser)]
#[command(name = "wfa-irl", version, about = "Learn task automata and transition costs from scored gridworld demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Doorkey,
    Multiroom,
}

impl Task {
    fn spec(self) -> TaskSpec {
        match self {
            Task::Doorkey => TaskSpec::doorkey(),
            Task::Multiroom => TaskSpec::multiroom(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Linear,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Opt {
    Adam,
    Sgd,
}

#[derive(Subcommand)]
enum Command {
    /// Generate expert successes and random failures as JSON lines.
    GenDemos {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, default_value_t = 100)]
        n_success: usize,
        #[arg(long, default_value_t = 100)]
        n_fail: usize,
        /// Expert temperature; 0 is the greedy optimal expert.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steps per random failure episode (default: one per map cell).
        #[arg(long)]
        fail_horizon: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a WFA to demonstration words by spectral learning.
    LearnWfa {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, required_unless_present = "sweep")]
        rank: Option<usize>,
        #[arg(long, required_unless_present = "sweep")]
        rows: Option<usize>,
        #[arg(long, required_unless_present = "sweep")]
        cols: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
        /// Grid search, e.g. `rank=2..10,rows=2..8,cols=2..8`.
        #[arg(long)]
        sweep: Option<String>,
        /// Seed of the held-out split used by the sweep.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn transition costs from the successful demonstrations.
    TrainCost {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        wfa: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        model: Model,
        #[arg(long, default_value_t = DEFAULT_AGENT_ETA)]
        eta: f64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "adam")]
        optimizer: Opt,
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        batch_size: usize,
        #[arg(long, default_value_t = DEFAULT_GRAD_CLIP)]
        grad_clip: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Roll the learned agent on fresh environments and write a report.
    Evaluate {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        wfa: PathBuf,
        #[arg(long)]
        cost: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_envs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode step cap (default: the task's horizon).
        #[arg(long)]
        horizon: Option<usize>,
        /// Agent temperature; 0 picks the cheapest control.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a word (comma-separated symbol bitmasks) with a WFA.
    ScoreWord {
        #[arg(long)]
        wfa: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        word: String,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write_text(path: &PathBuf, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_wfa(path: &PathBuf) -> anyhow::Result<Wfa64> {
    Wfa64::load(path).with_context(|| format!("loading WFA {}", path.display()))
}

fn demos_ap_count(demos: &[Demonstration]) -> anyhow::Result<usize> {
    let first = demos.first().context("demo file is empty")?;
    let kind = first.initial_state().kind();
    if demos.iter().any(|d| d.initial_state().kind() != kind) {
        bail!("demo file mixes task kinds");
    }
    Ok(kind.ap_count())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenDemos { task, n_success, n_fail, eta, seed, fail_horizon, out } => {
            if !(eta >= 0.0) {
                return Err(usage("--eta must be non-negative"));
            }
            let spec = task.spec();
            let mut demos = gen_success(&spec, n_success, eta, seed).context("generating expert demos")?;
            let horizon = fail_horizon.unwrap_or_else(|| default_failure_horizon(&spec));
            demos.extend(gen_failure(&spec, n_fail, seed, horizon).context("generating failure demos")?);
            save_demos(&out, &demos).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} demos ({} success, {} fail) to {}", demos.len(), n_success, n_fail, out.display());
        }
        Command::LearnWfa { demos, rank, rows, cols, xi, sweep: spec, seed, out } => {
            let ranges = spec.as_deref().map(SweepRanges::parse).transpose().map_err(|e| usage(e.to_string()))?;
            let demos = load_demos(&demos).with_context(|| format!("loading {}", demos.display()))?;
            let ap_count = demos_ap_count(&demos)?;
            let words: Vec<ScoredWord> = demos.iter().map(ScoredWord::from).collect();
            let wfa: Wfa64 = match ranges {
                Some(ranges) => {
                    let r = sweep(&words, &ranges, xi, ap_count, seed).context("sweep failed")?;
                    let p = r.best;
                    println!(
                        "best rank={} rows={} cols={} heldout_loss={:e} ({} configs)",
                        p.rank,
                        p.rows,
                        p.cols,
                        r.best_loss,
                        r.table.len()
                    );
                    r.wfa
                }
                None => {
                    let params = SpectralParams {
                        rank: rank.expect("required by clap"),
                        rows: rows.expect("required by clap"),
                        cols: cols.expect("required by clap"),
                    };
                    let w = fit(&words, params, xi, ap_count).context("spectral learning failed")?;
                    println!("fit loss={:e}", w.fit_loss(words.iter().map(|w| (&w.word, w.score))));
                    w
                }
            };
            wfa.save(&out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::TrainCost { demos, wfa, model, eta, lr, epochs, seed, optimizer, batch_size, grad_clip, out, trace } => {
            if !(eta > 0.0) || !(lr > 0.0) {
                return Err(usage("--eta and --lr must be positive"));
            }
            let demos = load_demos(&demos).with_context(|| format!("loading {}", demos.display()))?;
            let wfa = load_wfa(&wfa)?;
            let first = demos.first().context("demo file is empty")?.initial_state();
            if wfa.ap_count != first.kind().ap_count() {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "WFA has {} propositions but the demos' task has {}",
                    wfa.ap_count,
                    first.kind().ap_count()
                )));
            }
            let kind = match model {
                Model::Linear => CostKind::Linear,
                Model::Mlp => CostKind::Mlp,
            };
            let init = CostModel64::for_state(kind, first, seed);
            let cfg = TrainConfig {
                eta,
                lr,
                epochs,
                optimizer: match optimizer {
                    Opt::Adam => OptimizerKind::Adam,
                    Opt::Sgd => OptimizerKind::Sgd,
                },
                grad_clip,
                batch_size,
                seed,
                ..TrainConfig::default()
            };
            let result = train(&demos, &wfa, init, &cfg).context("training failed")?;
            result.model.save(&out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = trace {
                save_trace(&path, &result.trace).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(last) = result.trace.last() {
                println!("epoch {} mean_nll={:.6} skipped={}", last.epoch, last.mean_nll, last.skipped);
            }
        }
        Command::Evaluate { task, wfa, cost, n_envs, seed, horizon, eta, out } => {
            if !(eta >= 0.0) {
                return Err(usage("--eta must be non-negative"));
            }
            let spec = task.spec();
            let wfa = load_wfa(&wfa)?;
            let model: CostModel64 =
                CostModel::load(&cost).with_context(|| format!("loading cost model {}", cost.display()))?;
            if model.feature_dim != feature_dim(spec.height, spec.width) {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "cost model has {} features, task needs {}",
                    model.feature_dim,
                    feature_dim(spec.height, spec.width)
                )));
            }
            if wfa.ap_count != spec.ap_count() {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "WFA has {} propositions, task needs {}",
                    wfa.ap_count,
                    spec.ap_count()
                )));
            }
            let cfg = EvalConfig {
                n_envs,
                seed,
                horizon: horizon.unwrap_or(spec.horizon_cap),
                eta,
                limits: Limits::default(),
            };
            let report = evaluate(&spec, &wfa, &model, &cfg);
            let mut text = report.to_json();
            text.push('\n');
            write_text(&out, &text)?;
            println!(
                "tsr={:.3} mhd={} mean_return={:.3} expert_mean_return={:.3}",
                report.tsr,
                report.mhd.map_or("null".to_string(), |m| format!("{m:.3}")),
                report.mean_return,
                report.expert_mean_return
            );
        }
        Command::ScoreWord { wfa, word } => {
            let wfa = load_wfa(&wfa)?;
            let word = Word::parse(&word, wfa.ap_count).map_err(|e| usage(e.to_string()))?;
            let score = wfa.score(&word);
            let verdict = if score >= wfa.xi { "accept" } else { "reject" };
            println!("{score} {verdict}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
