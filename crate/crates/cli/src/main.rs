use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use coded_edge::dqn::{curve_csv, train_dueling, train_plain_dqn};
use coded_edge::harness::{
    evaluate_policy, make_policy, registry::training_seed, run_sweep, sweep_csv, write_plot, RunConfig, SweepSpec,
};
use coded_edge::oracle::{rank_actions, ranking_csv};
use coded_edge::qlearn::train_qlearning;
use coded_edge::rng::{self, stream};
use coded_edge::{ActionSpace, EdgeEnv, NodeSet};

#[derive(Parser)]
#[command(name = "coded-edge", version, about = "Coded offloading of learning tasks to straggling edge nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Qlearn,
    Dueling,
    Dqn,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learned scheduler and write its checkpoint and training curve.
    Train {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a policy and print its metrics.
    Eval {
        #[arg(long)]
        policy: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        slots: u64,
        #[arg(long, default_value_t = 10_000)]
        warmup: u64,
    },
    /// Run a parameter sweep; writes sweep.csv and one SVG per metric.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank every action for one task by Monte-Carlo serving time.
    OracleCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        task_size: u32,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// Free nodes, 1-based and comma separated; all nodes by default.
        #[arg(long, value_delimiter = ',')]
        available: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the action table as CSV.
    Actions {
        #[arg(long, default_value_t = 5)]
        nodes: usize,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            algo,
            config,
            seed,
            iterations,
            out,
        } => {
            let mut run = load_config(config.as_deref())?;
            if let Some(i) = iterations {
                run.train.iterations = i;
                run.qlearn.iterations = i;
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut env = EdgeEnv::new(run.system.clone(), training_seed(seed))?;
            match algo {
                Algo::Qlearn => {
                    let mut rng = rng::derive(seed, stream::LEARNER);
                    let res = train_qlearning(&mut env, &run.qlearn, &mut rng)?;
                    res.table.save(&out.join("qtable.csv"))?;
                    let mut csv = String::from("iteration,mean_reward\n");
                    for (i, r) in &res.reward_curve {
                        csv.push_str(&format!("{i},{r}\n"));
                    }
                    fs::write(out.join("curve.csv"), csv)?;
                    println!("states visited: {}", res.table.len());
                }
                Algo::Dueling | Algo::Dqn => {
                    let res = match algo {
                        Algo::Dueling => train_dueling(&mut env, &run.train, seed)?,
                        _ => train_plain_dqn(&mut env, &run.train, seed)?,
                    };
                    res.net.save(&out.join("network.txt"))?;
                    fs::write(out.join("curve.csv"), curve_csv(&res.curve))?;
                    if let Some(last) = res.curve.last() {
                        println!("final eval reward: {}", last.eval_reward);
                    }
                    println!("gradient steps: {}", res.gradient_steps);
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Eval {
            policy,
            checkpoint,
            config,
            seed,
            slots,
            warmup,
        } => {
            let run = load_config(config.as_deref())?;
            let space = Arc::new(ActionSpace::new(run.system.num_nodes)?);
            let p = make_policy(&policy, &run, space, seed, checkpoint.as_deref())?;
            let m = evaluate_policy(&run.system, &p, slots, warmup, seed)?;
            println!("policy,seed,avg_queue,drop_rate,drops_per_arrival,avg_delay_slots,avg_delay_seconds,throughput");
            println!(
                "{},{},{},{},{},{},{},{}",
                policy,
                seed,
                m.avg_queue_occupancy,
                m.drop_rate,
                m.drops_per_arrival,
                m.avg_delay_slots,
                m.avg_delay_seconds,
                m.throughput
            );
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::load(&spec)?;
            let rows = run_sweep(&spec)?;
            let csv = sweep_csv(&rows);
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            fs::write(out.join("sweep.csv"), &csv)?;
            for metric in ["avg_queue", "drop_rate", "avg_delay_slots"] {
                write_plot(&csv, "value", metric, "policy", &out.join(format!("{metric}.svg")))?;
            }
            println!("{} rows written to {}", rows.len(), out.display());
        }
        Command::OracleCheck {
            config,
            task_size,
            reps,
            available,
            seed,
        } => {
            let run = load_config(config.as_deref())?;
            let n = run.system.num_nodes;
            let free = if available.is_empty() {
                NodeSet::full(n)
            } else {
                if let Some(&j) = available.iter().find(|&&j| j == 0 || j > n) {
                    bail!("node {j} is out of range 1..={n}");
                }
                available.iter().map(|j| j - 1).collect()
            };
            let space = ActionSpace::new(n)?;
            let mut rng = rng::derive(seed, stream::ORACLE);
            let ranked = rank_actions(&run.system, &space, task_size, free, reps, &mut rng)?;
            print!("{}", ranking_csv(&ranked));
        }
        Command::Actions { nodes } => print!("{}", ActionSpace::new(nodes)?.to_csv()),
    }
    Ok(())
}
