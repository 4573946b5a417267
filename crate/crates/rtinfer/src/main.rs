use std::fs::File;
use std::io::{stdout, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rtinfer::bench::bench;
use rtinfer::experiments::{self, ExperimentSpec, Source};
use rtinfer::io::{self, ClusterFile, ModelFile, PstFile, TasksetFile};
use rtinfer_core::cluster::fit_responses;
use rtinfer_core::inference::{run_attack, run_attack_from, train, TrainConfig};
use rtinfer_core::metrics::Score;
use rtinfer_core::pst::Pst;
use rtinfer_core::rng::seeded;
use rtinfer_core::rta;
use rtinfer_core::simulator::{observer_sequence, simulate};
use rtinfer_core::taskmodel::{generate_taskset, GeneratorConfig};

#[derive(Parser)]
#[command(name = "rtinfer", version, about = "Schedule-based mode inference for fixed-priority task sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Response-time bounds and schedulability of every task.
    Rta {
        taskset: PathBuf,
        /// CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Draw a random rate-monotonic taskset.
    Generate {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.6)]
        utilization: f64,
        #[arg(long, default_value_t = 0.3)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a taskset from a synchronous release and write the job trace.
    Simulate {
        taskset: PathBuf,
        #[arg(long, default_value_t = 1)]
        hyperperiods: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the observer response sequence here.
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Suffix-tree operations.
    Pst {
        #[command(subcommand)]
        cmd: PstCmd,
    },
    /// Two-cluster threshold over a response CSV.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train or run the attack model.
    Attack {
        #[command(subcommand)]
        cmd: AttackCmd,
    },
    /// Synthetic experiment sweeps.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
    /// Time training and single predictions on a trace.
    Bench {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
}

#[derive(Subcommand)]
enum PstCmd {
    /// Build a tree from a response CSV.
    Build {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.001)]
        pmin: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AttackCmd {
    Train {
        #[arg(long)]
        trace: PathBuf,
        /// Training config JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Taskset JSON overriding the one embedded in the trace.
        #[arg(long)]
        taskset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Score only jobs released after this many hyperperiods, for traces
        /// that also contain the training span.
        #[arg(long, default_value_t = 0)]
        skip_hyperperiods: u64,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    Run(ExperimentArgs),
    /// Print the default spec as JSON.
    Spec {
        #[arg(long)]
        full: bool,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Spec JSON; defaults to the desk-scale spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Large sweep (10..90 % utilization, 100 tasksets per point).
    #[arg(long)]
    full: bool,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Rta { taskset, csv } => cmd_rta(&taskset, csv),
        Cmd::Generate { n, utilization, rate, seed, out } => {
            let cfg = GeneratorConfig::new(n, utilization, rate, seed);
            let ts = generate_taskset(&cfg, &mut seeded(seed))?;
            let json = serde_json::to_string_pretty(&TasksetFile::of(&ts))?;
            match out {
                Some(p) => std::fs::write(&p, json + "\n").with_context(|| format!("writing {}", p.display())),
                None => Ok(println!("{json}")),
            }
        }
        Cmd::Simulate { taskset, hyperperiods, seed, out, responses } => {
            let ts = io::read_taskset(&taskset)?;
            let tr = simulate(&ts, hyperperiods, seed)?;
            io::save_trace(&out, &tr)?;
            if let Some(p) = responses {
                let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                io::write_responses(f, &observer_sequence(&tr))?;
            }
            eprintln!("{} jobs, {} deadline misses", tr.jobs.len(), tr.deadline_misses());
            Ok(())
        }
        Cmd::Pst { cmd: PstCmd::Build { input, depth, pmin, out } } => {
            let seq = io::load_responses(&input)?;
            let pst = Pst::build(&seq, depth, pmin)?;
            io::write_json(&out, &PstFile::of(&pst))?;
            eprintln!("{} nodes over {} symbols", pst.nodes().len(), pst.alphabet().len());
            Ok(())
        }
        Cmd::Cluster { input, out } => {
            let seq = io::load_responses(&input)?;
            let m = fit_responses(&seq)?;
            io::write_json(&out, &ClusterFile::from(&m))
        }
        Cmd::Attack { cmd } => cmd_attack(cmd),
        Cmd::Experiment { cmd: ExperimentCmd::Spec { full } } => {
            let spec = if full { ExperimentSpec::default().full() } else { ExperimentSpec::default() };
            println!("{}", serde_json::to_string_pretty(&spec)?);
            Ok(())
        }
        Cmd::Experiment { cmd: ExperimentCmd::Run(args) } => cmd_experiment(args),
        Cmd::Bench { trace, config, repeats } => {
            let tr = io::load_trace(&trace, None)?;
            let cfg = load_config(config.as_deref())?;
            let report = bench(&tr, &cfg, repeats)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_rta(path: &Path, csv: bool) -> Result<()> {
    let ts = io::read_taskset(path)?;
    let results = rta::analyze(&ts)?;
    let mut out = stdout().lock();
    if csv {
        writeln!(out, "task_id,role,r_min,r_max,deadline,schedulable")?;
    } else {
        writeln!(out, "{:>4} {:>9} {:>8} {:>8} {:>8}  schedulable", "id", "role", "r_min", "r_max", "deadline")?;
    }
    for r in &results {
        let t = ts.task(r.task_id)?;
        let role = format!("{:?}", t.role).to_lowercase();
        if csv {
            writeln!(out, "{},{},{},{},{},{}", r.task_id, role, r.r_min, r.r_max, t.deadline, r.schedulable)?;
        } else {
            writeln!(out, "{:>4} {:>9} {:>8} {:>8} {:>8}  {}", r.task_id, role, r.r_min, r.r_max, t.deadline, r.schedulable)?;
        }
    }
    if !csv {
        match rta::combination_count(&ts) {
            Ok(n) => writeln!(out, "victim-mode combinations in the observer window: {n}")?,
            Err(e) => writeln!(out, "victim-mode combinations: n/a ({e})")?,
        }
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(TrainConfig::default()),
    }
}

fn cmd_attack(cmd: AttackCmd) -> Result<()> {
    match cmd {
        AttackCmd::Train { trace, config, taskset, out } => {
            let ts = taskset.as_deref().map(io::read_taskset).transpose()?;
            let tr = io::load_trace(&trace, ts)?;
            let cfg = load_config(config.as_deref())?;
            let model = train(&tr, &cfg)?;
            io::write_json(&out, &ModelFile::new(&model, &tr.taskset))?;
            eprintln!(
                "threshold {:.1} (centroids {:.1} / {:.1}), {} tree nodes",
                model.cluster.threshold,
                model.cluster.centroids[0],
                model.cluster.centroids[1],
                model.pst.nodes().len()
            );
            Ok(())
        }
        AttackCmd::Run { model, trace, out, skip_hyperperiods } => {
            let file: ModelFile = io::read_json(&model)?;
            let (model, ts) = file.into_model()?;
            let tr = io::load_trace_or(&trace, ts)?;
            if tr.taskset.fingerprint() != model.fingerprint {
                bail!("model was trained on a different taskset");
            }
            let records = if skip_hyperperiods == 0 {
                run_attack(&model, &tr)
            } else {
                run_attack_from(&model, &tr, skip_hyperperiods * tr.taskset.hyperperiod()?)
            };
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            io::write_predictions(f, &records)?;
            match Score::of(&records) {
                Ok(s) => eprintln!("{} predictions, IP {:.4}, FP {:.4}", s.n_jobs, s.ip(), s.fp_pct()),
                Err(_) => eprintln!("no observer jobs to score"),
            }
            Ok(())
        }
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut spec: ExperimentSpec = match &args.spec {
        Some(p) => io::read_json(p)?,
        None => ExperimentSpec::default(),
    };
    if args.full {
        spec = spec.full();
    }
    let base = args.spec.as_deref().and_then(Path::parent);
    let source = Source::for_spec(&spec, base)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n);
    }
    let res = pool.build()?.install(|| experiments::run(&spec, &source, args.seed))?;
    let files = experiments::write_results(&args.out, &spec, args.seed, &res)?;
    for f in files {
        eprintln!("wrote {}", args.out.join(f).display());
    }
    Ok(())
}
