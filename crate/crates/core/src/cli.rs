//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::data::{
    read_checkpoint, read_labels, read_manifest, synth_generate, write_checkpoint, write_labels, Checkpoint,
    SynthSpec,
};
use crate::domain::{ActionSet, FrameLabeling, Segmentation};
use crate::error::{Error, Result};
use crate::eval::{Metric, Scoreboard};
use crate::infer::{align_video, segment_video, InferOptions, SetDraw, DEFAULT_K};
use crate::oracle::oracle_check;
use crate::rng;
use crate::scorer::{LrSchedule, DEFAULT_HIDDEN};
use crate::train::{initial_hmm, load_videos, pretrain_model, train, PretrainConfig, TrainConfig, TrainVideo};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "ACVSEG_THREADS";

/// Videos with frame labels used to report anchor IoD during training.
const PROBE_VIDEOS: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "acvseg", version, about = "Set-supervised temporal action segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with hidden frame labels.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the initial HMM and pretrain the scorer from action sets.
    Pretrain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        /// Minimum action length for the initial length fit.
        #[arg(long, default_value_t = crate::hmm::DEFAULT_MIN_LENGTH)]
        lmin: f64,
    },
    /// Pseudo-supervised training with anchor-constrained Viterbi labels.
    Train(TrainArgs),
    /// Segment videos using the action sets of a training corpus.
    Segment {
        #[command(flatten)]
        common: InferArgs,
        /// Corpus whose action sets are sampled.
        #[arg(long = "train-manifest")]
        train_manifest: PathBuf,
        #[arg(long = "set-draw", value_enum, default_value_t = SetDrawArg::PerCandidate)]
        set_draw: SetDrawArg,
    },
    /// Align videos to their known action sets.
    Align {
        #[command(flatten)]
        common: InferArgs,
    },
    /// Score predicted labels against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "all")]
        metric: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Compare the constrained Viterbi with exhaustive enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 30)]
        tmax: usize,
        #[arg(long, default_value_t = 3)]
        cmax: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    init: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long = "lr-drop-at", default_value_t = 10_000)]
    lr_drop_at: usize,
    #[arg(long = "lr-after", default_value_t = 0.001)]
    lr_after: f64,
    #[arg(long, default_value_t = crate::acv::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = crate::scorer::DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = crate::acv::DEFAULT_TAU)]
    tau: usize,
    /// Re-estimate the initial HMM with this minimum length. Only applies
    /// to a checkpoint that has not been trained yet.
    #[arg(long)]
    lmin: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    prune: Switch,
    #[arg(long = "progress-every", default_value_t = crate::train::PROGRESS_EVERY)]
    progress_every: usize,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SetDrawArg {
    PerCandidate,
    PerVideo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 2 for usage errors and missing files, 1 otherwise.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return 2;
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                Error::InvalidInput(_) => 2,
                _ => 1,
            }
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV}={value:?} is not a positive integer"))?;
    // A pool built earlier in this process stays in place.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, out, seed } => {
            let mut spec = SynthSpec::read(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let corpus = synth_generate(&spec, &out)?;
            println!(
                "wrote {} training and {} test videos to {}",
                corpus.train.videos.len(),
                corpus.test.videos.len(),
                out.display()
            );
            Ok(())
        }
        Command::Pretrain {
            manifest,
            out,
            epochs,
            lr,
            seed,
            hidden,
            lmin,
        } => {
            let manifest = read_manifest(&manifest)?;
            let videos = load_videos(&manifest, false)?;
            let config = PretrainConfig {
                hidden,
                epochs,
                lr,
                min_length: check_lmin(lmin)?,
                seed,
            };
            let model = pretrain_model(manifest.vocab.clone(), &videos, &config, |e, loss| {
                println!("epoch {e} mil_loss {loss:.6}");
            })?;
            write_checkpoint(&out, &Checkpoint { model, iteration: 0 })
        }
        Command::Train(args) => run_train(args),
        Command::Segment {
            common,
            train_manifest,
            set_draw,
        } => {
            let sets = read_manifest(&train_manifest)?.sets();
            let options = InferOptions {
                k: common.k,
                set_draw: match set_draw {
                    SetDrawArg::PerCandidate => SetDraw::PerCandidate,
                    SetDrawArg::PerVideo => SetDraw::PerVideo,
                },
            };
            run_inference(&common, "segment", |model, x, _set, r| segment_video(model, x, &sets, options, r))
        }
        Command::Align { common } => {
            let k = common.k;
            run_inference(&common, "align", |model, x, set, r| align_video(model, x, set, k, r))
        }
        Command::Eval {
            pred,
            gt,
            metric,
            format,
        } => {
            let metric: Metric = metric.parse()?;
            let board = evaluate(&pred, &gt)?;
            match format {
                Format::Table => print!("{}", board.table(metric)),
                Format::Csv => print!("{}", board.csv(metric)),
            }
            Ok(())
        }
        Command::OracleCheck {
            tmax,
            cmax,
            trials,
            seed,
        } => {
            let report = oracle_check(tmax, cmax, trials, seed)?;
            println!("{}/{} exact (max score gap {:.3e})", report.exact, report.trials, report.max_gap);
            if report.passed() {
                Ok(())
            } else {
                Err(Error::CheckFailed(format!("{} of {} trials disagree", report.trials - report.exact, report.trials)))
            }
        }
    }
}

fn check_lmin(lmin: f64) -> Result<f64> {
    if lmin >= 1.0 && lmin.is_finite() {
        Ok(lmin)
    } else {
        Err(Error::InvalidInput(format!("--lmin {lmin} must be >= 1")))
    }
}

fn run_train(args: TrainArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let videos = load_videos(&manifest, true)?;
    let Checkpoint { mut model, iteration } = read_checkpoint(&args.init)?;
    if model.vocab != manifest.vocab {
        return Err(Error::InvalidInput("checkpoint and manifest vocabularies differ".into()));
    }
    if let Some(lmin) = args.lmin {
        let lmin = check_lmin(lmin)?;
        if iteration == 0 {
            model.hmm = initial_hmm(&videos, model.vocab.len(), lmin)?;
        } else {
            eprintln!("note: --lmin ignored, checkpoint already trained for {iteration} iterations");
        }
    }
    let config = TrainConfig {
        iterations: args.iters,
        schedule: LrSchedule {
            initial: args.lr,
            drop_at: args.lr_drop_at,
            after: args.lr_after,
        },
        alpha: args.alpha,
        beta: args.beta,
        tau: args.tau,
        prune: args.prune == Switch::On,
        seed: args.seed,
        progress_every: args.progress_every,
    };
    if !(config.beta >= 0.0) {
        return Err(Error::InvalidInput(format!("--beta {} must be >= 0", config.beta)));
    }
    let probe: Vec<TrainVideo> = videos.iter().filter(|v| v.truth.is_some()).take(PROBE_VIDEOS).cloned().collect();
    let end = train(&mut model, &videos, iteration, &config, &probe, |p| {
        let iod = p.anchor_iod.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut line = format!("iter {} ce {:.6} div {:.6} anchor_iod {iod}", p.iteration, p.mean_ce, p.mean_div);
        if p.prune_fallbacks > 0 {
            line.push_str(&format!(" prune_fallbacks {}", p.prune_fallbacks));
        }
        println!("{line}");
    })?;
    write_checkpoint(&args.out, &Checkpoint { model, iteration: end })
}

fn run_inference<F>(args: &InferArgs, label: &str, infer: F) -> Result<()>
where
    F: Fn(&crate::Model, &crate::FrameFeatures, &ActionSet, &mut rng::Stream) -> Result<crate::acv::ScoredSegmentation>
        + Sync,
{
    let manifest = read_manifest(&args.manifest)?;
    let model = read_checkpoint(&args.ckpt)?.model;
    if model.vocab != manifest.vocab {
        return Err(Error::InvalidInput("checkpoint and manifest vocabularies differ".into()));
    }
    let results: Vec<Segmentation> = manifest
        .videos
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let x = manifest.features(i)?;
            let mut r = rng::fork(args.seed, label, i as u64);
            Ok(infer(&model, &x, &v.set, &mut r)?.segmentation)
        })
        .collect::<Result<_>>()?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (v, seg) in manifest.videos.iter().zip(&results) {
        write_labels(&args.out.join(format!("{}.txt", v.id)), &seg.expand(), &model.vocab)?;
    }
    println!("wrote {} predictions to {}", results.len(), args.out.display());
    Ok(())
}

/// Reads `<pred>/<id>.txt` for every video of the ground-truth manifest.
pub fn evaluate(pred: &Path, gt: &Path) -> Result<Scoreboard> {
    let manifest = read_manifest(gt)?;
    let mut board = Scoreboard::default();
    for v in &manifest.videos {
        let truth_path = v
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("video {} has no frame labels", v.id)))?;
        let truth: FrameLabeling = read_labels(truth_path, &manifest.vocab)?;
        let predicted = read_labels(&pred.join(format!("{}.txt", v.id)), &manifest.vocab)?;
        board.add(&predicted.run_lengths()?, &truth.run_lengths()?)?;
    }
    Ok(board)
}
