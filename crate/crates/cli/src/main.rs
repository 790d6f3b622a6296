use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualgrain::datagen::{Corpus, GenConfig, RecordWriter, Vocabulary};
use dualgrain::eval::{evaluate, selo_heatmap, write_report, EvalOptions};
use dualgrain::harness::train::split_records;
use dualgrain::harness::{run_ablation, train_from_path, RunLog, StepLog, TrainConfig, Variant};
use dualgrain::model::{Checkpoint, ModelParams};
use dualgrain::{datagen, Error, Result};

#[derive(Parser)]
#[command(
    name = "dualgrain",
    version,
    about = "Dual-granularity contrastive training lab"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset file.
    Gen(GenArgs),
    /// Train a model on a dataset file.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset file.
    Eval(EvalArgs),
    /// Train several variants over several seeds and tabulate their scores.
    Ablate(AblateArgs),
    /// Print a checkpoint header and a summary of its training log.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    count: usize,
    /// Grid size as HxW.
    #[arg(long, default_value = "8x8")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    long_mean: Option<f64>,
    #[arg(long)]
    short_mean: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint path; logs go next to it.
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report tables here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export the localization heatmap of this test record.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    record: usize,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated: short, long, dual, long-to-short, short-to-long, base.
    #[arg(long, default_value = "short,long,dual")]
    variants: String,
    /// A seed count N (seeds 0..N) or a comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Step log; defaults to the one written next to the checkpoint.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_config(path: &Option<PathBuf>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Param(format!("grid must look like 8x8, got {s:?}"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?))
}

fn gen(a: GenArgs) -> Result<()> {
    let (height, width) = parse_grid(&a.grid)?;
    let d = GenConfig::default();
    let cfg = GenConfig {
        height,
        width,
        long_mean: a.long_mean.unwrap_or(d.long_mean),
        short_mean: a.short_mean.unwrap_or(d.short_mean),
        test_fraction: a.test_fraction.unwrap_or(d.test_fraction),
        ..d
    };
    let vocab = Vocabulary::standard();
    let mut w = RecordWriter::create(&a.out)?;
    for r in Corpus::new(a.seed, a.count, &cfg, &vocab)? {
        w.write(&r?).map_err(|e| io_err(&a.out, e))?;
    }
    w.finish().map_err(|e| io_err(&a.out, e))?;
    println!("wrote {} records to {}", a.count, a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let vocab = Vocabulary::standard();
    let out = train_from_path(&cfg, &a.data, &vocab)?;
    out.params.to_checkpoint().save(&a.out)?;
    let steps = sibling(&a.out, ".steps.csv");
    let mut f = create(&steps)?;
    out.log.write_steps(&mut f).map_err(|e| io_err(&steps, e))?;
    f.flush().map_err(|e| io_err(&steps, e))?;
    let evals = sibling(&a.out, ".evals.csv");
    let mut f = create(&evals)?;
    out.log.write_evals(&mut f).map_err(|e| io_err(&evals, e))?;
    f.flush().map_err(|e| io_err(&evals, e))?;
    let last = out.log.steps.last();
    println!(
        "trained {} steps; final loss {:.4}; checkpoint {}",
        out.log.steps.len(),
        last.map_or(f64::NAN, |s| s.loss_total),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let params = ModelParams::from_checkpoint(&Checkpoint::load(&a.checkpoint)?, &cfg.model)?;
    let (_, test) = split_records(datagen::read_records(&a.data)?);
    let vocab = Vocabulary::standard();
    let opts = EvalOptions {
        selo_records: cfg.selo_records,
        ..EvalOptions::default()
    };
    let snap = evaluate(&params, &vocab, &test, &opts)?;
    match &a.out {
        Some(p) => {
            let mut f = create(p)?;
            write_report(&mut f, &snap).map_err(|e| io_err(p, e))?;
            f.flush().map_err(|e| io_err(p, e))?;
        }
        None => write_report(&mut std::io::stdout().lock(), &snap)
            .map_err(|e| io_err(Path::new("<stdout>"), e))?,
    }
    if let Some(path) = &a.heatmap {
        let r = test
            .get(a.record)
            .ok_or_else(|| Error::Param(format!("test split has no record {}", a.record)))?;
        let map = selo_heatmap(&params, &r.scene.grid, &r.short_tokens, opts.window)?;
        std::fs::write(path, map.to_text()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Param(format!("bad seed list {s:?}"));
    if s.contains(',') {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let n: u64 = s.parse().map_err(|_| bad())?;
        Ok((0..n).collect())
    }
}

fn ablate(a: AblateArgs) -> Result<()> {
    let mut base = load_config(&a.config)?;
    if let Some(s) = &a.seeds {
        base.seeds = parse_seeds(s)?;
    }
    let variants = a
        .variants
        .split(',')
        .map(|n| Variant::named(n.trim(), &base))
        .collect::<Result<Vec<_>>>()?;
    let (train_set, test_set) = split_records(datagen::read_records(&a.data)?);
    let vocab = Vocabulary::standard();
    let table = run_ablation(&base, &variants, &train_set, &test_set, &vocab)?;
    let csv = table.to_csv();
    match &a.out {
        Some(p) => std::fs::write(p, &csv).map_err(|e| io_err(p, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn alpha_summary(steps: &[StepLog]) -> String {
    let Some(first) = steps.first() else {
        return "alpha trace: empty".into();
    };
    let plateau = steps.iter().take_while(|s| s.alpha == first.alpha).count();
    let (lo, hi) = steps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.alpha), hi.max(s.alpha))
        });
    let resid = steps
        .iter()
        .map(|s| (s.loss_total - (s.alpha * s.loss_long + (1.0 - s.alpha) * s.loss_short)).abs())
        .fold(0.0, f64::max);
    let last = steps.last().expect("non-empty");
    format!(
        "alpha trace: steps={} first={} plateau_steps={} min={lo} max={hi} last={}\n\
         loss: first={:.6} last={:.6} max_blend_residual={resid:e}",
        steps.len(),
        first.alpha,
        plateau,
        last.alpha,
        first.loss_total,
        last.loss_total
    )
}

fn inspect(a: InspectArgs) -> Result<()> {
    println!("{}", Checkpoint::read_header(&a.checkpoint)?);
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    if let Some(t) = ckpt.get("log_tau") {
        println!("temperature: {}", t.data()[0].exp());
    }
    let log = a
        .log
        .unwrap_or_else(|| sibling(&a.checkpoint, ".steps.csv"));
    match std::fs::read_to_string(&log) {
        Ok(text) => println!("{}", alpha_summary(&RunLog::parse_steps(&text)?)),
        Err(_) if !log.exists() => println!("alpha trace: no log at {}", log.display()),
        Err(e) => return Err(io_err(&log, e)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Train(a) => train(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Ablate(a) => ablate(a),
        Cmd::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::from(1)
        }
    }
}
