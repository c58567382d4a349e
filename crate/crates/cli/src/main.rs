use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lutpool::harness::bench::{bench_image, BenchReport};
use lutpool::harness::config::{write_exported, ConfigFile, PipelineSection, StageSpec};
use lutpool::harness::eval::{evaluate_all, write_metric_csv};
use lutpool::harness::manifest::{DatasetManifest, LoadedPair, Split};
use lutpool::harness::pnm::{read_gray, write_pgm};
use lutpool::harness::synthetic::SyntheticSpec;
use lutpool::harness::HarnessError;
use lutpool::lut::{bake, read_header, Lut};
use lutpool::metrics::EvalOptions;
use lutpool::pipeline::{restore_image, PipelineConfig};
use lutpool::pooling::Norm;
use lutpool::training::{
    finetune, load_checkpoint, save_checkpoint, train, TrainOutcome, TrainPair, TrainSet, TrainableModel,
    TrainablePooling,
};
use lutpool::Execution;

#[derive(Parser)]
#[command(name = "lutpool", version, about = "Rotation-ensemble lookup-table image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bake an oracle into a table file.
    Bake(BakeArgs),
    /// Train restoration tables with average (or generalized median) pooling.
    Train(TrainArgs),
    /// Fine-tune a checkpoint with a new pooling rule.
    Finetune(FinetuneArgs),
    /// Restore images with one or more tables.
    Restore(RestoreArgs),
    /// Score outputs against ground truth.
    Eval(EvalArgs),
    /// Restore, score and time a dataset split.
    Bench(BenchArgs),
    /// Print table headers.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolingKind {
    Avg,
    Gmp,
    Oap,
}

impl PoolingKind {
    fn name(self) -> &'static str {
        match self {
            PoolingKind::Avg => "avg",
            PoolingKind::Gmp => "gmp",
            PoolingKind::Oap => "oap",
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML file with a [pipeline] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stage table, in stage order (repeatable).
    #[arg(long = "lut")]
    luts: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pooling: Option<PoolingKind>,
    /// Generalized median temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Coefficient table for orientation-aware pooling.
    #[arg(long)]
    coeff_lut: Option<PathBuf>,
    /// Super-resolution factor; inferred from the last table when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    scale: Option<u8>,
    /// Kernel pattern for tables given with --lut (S, D or Y).
    #[arg(long)]
    pattern: Option<String>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest (tab-separated split, clean, degraded).
    #[arg(long, conflicts_with = "synthetic")]
    manifest: Option<PathBuf>,
    /// Use the built-in synthetic stripes-and-ramps corpus.
    #[arg(long)]
    synthetic: bool,
}

#[derive(Args)]
struct BakeArgs {
    /// identity, constant:<v>, zero-residual or uniform-coeff
    #[arg(long)]
    oracle: String,
    #[arg(long, default_value_t = 4)]
    q: u8,
    /// Kernel pattern giving the input count (S, D or Y).
    #[arg(long, default_value = "S")]
    pattern: String,
    /// Outputs per anchor are scale^2 (1 for same-size restoration).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    scale: u8,
    #[arg(long, default_value_t = 8)]
    bits: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// avg or gmp (trainable temperature starting at --tau).
    #[arg(long, value_enum, default_value = "avg")]
    pooling: PoolingKind,
    #[arg(long, default_value_t = 30.0)]
    tau: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FinetuneArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "oap")]
    pooling: PoolingKind,
    /// Initial generalized median temperature.
    #[arg(long, default_value_t = 30.0)]
    tau: f64,
    /// Sampling interval exponent of a fresh coefficient table.
    #[arg(long, default_value_t = 5)]
    coeff_q: u8,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RestoreArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory; results keep the input file stem.
    #[arg(long)]
    out: PathBuf,
    /// PGM or PPM inputs (colour is reduced to luma).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest whose clean images are the references.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Directory holding `<stem>.pgm` outputs for the manifest items.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Border shaved before scoring (super-resolution convention: the scale).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    scale: Option<u8>,
    /// PSNR-B block size (0 disables it).
    #[arg(long, default_value_t = 8)]
    block: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Reference and output image, when not using a manifest.
    #[arg(num_args = 2, value_names = ["REFERENCE", "OUTPUT"], conflicts_with = "manifest")]
    pair: Vec<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Optional directory for the restored images.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(required = true)]
    luts: Vec<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(HarnessError),
}

impl<E: Into<HarnessError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        Some(p) => Ok(ConfigFile::load(p)?),
        None => Ok(ConfigFile {
            base_dir: PathBuf::from("."),
            ..ConfigFile::default()
        }),
    }
}

fn build_pipeline(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let config = load_config(args.config.as_deref())?;
    let mut section: PipelineSection = config.pipeline.clone();
    if !args.luts.is_empty() {
        section.stages = args
            .luts
            .iter()
            .map(|p| StageSpec::One(absolute(p).to_string_lossy().into_owned()))
            .collect();
        if args.config.is_none() {
            let first = read_header(&args.luts[0])?;
            let last = read_header(args.luts.last().unwrap())?;
            section.residual = first.is_signed();
            let side = (last.m as f64).sqrt().round() as usize;
            if args.scale.is_none() {
                if last.m == 1 {
                    section.task = "restore".into();
                } else {
                    section.task = "sr".into();
                    section.scale = side;
                }
            }
        }
    }
    if section.stages.is_empty() {
        return Err(usage("no tables: pass --lut or a --config with stages"));
    }
    if let Some(s) = args.scale {
        section.task = "sr".into();
        section.scale = s as usize;
    }
    if let Some(p) = &args.pattern {
        section.patterns = vec![lutpool::harness::config::PatternSpec::Builtin(p.clone())];
    }
    if let Some(k) = args.pooling {
        section.pooling.kind = k.name().into();
    }
    if let Some(t) = args.tau {
        section.pooling.tau = t;
    }
    if let Some(c) = &args.coeff_lut {
        section.pooling.coeff_lut = Some(absolute(c).to_string_lossy().into_owned());
    }
    if args.sequential {
        section.execution = "sequential".into();
    }
    Ok(section.build(&config.base_dir)?)
}

fn parse_split(s: &str) -> Result<Split, Failure> {
    s.parse().map_err(|_| usage(format!("unknown split {s:?} (train, val or test)")))
}

fn to_pairs(pairs: Vec<LoadedPair>) -> Vec<TrainPair> {
    pairs
        .into_iter()
        .map(|p| TrainPair {
            input: p.degraded,
            target: p.clean,
        })
        .collect()
}

fn load_training_data(data: &DataArgs, scale: usize) -> Result<(Vec<TrainPair>, Vec<TrainPair>), Failure> {
    if let Some(m) = &data.manifest {
        let m = DatasetManifest::load(m)?;
        Ok((to_pairs(m.load_pairs(Split::Train)?), to_pairs(m.load_pairs(Split::Val)?)))
    } else if data.synthetic {
        let spec = SyntheticSpec {
            scale: scale.max(2),
            ..SyntheticSpec::default()
        };
        Ok(spec.pairs()?)
    } else {
        Err(usage("pass --manifest <path> or --synthetic"))
    }
}

fn write_outcome(
    out: &Path,
    model: &TrainableModel,
    outcome: &TrainOutcome,
    step: u64,
    exec: Execution,
) -> Outcome {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    outcome.write_log(out.join("log.csv")).map_err(HarnessError::from)?;
    save_checkpoint(out.join("checkpoint"), model, step).map_err(HarnessError::from)?;
    let exported = model.export(8, exec).map_err(HarnessError::from)?;
    let config = write_exported(out, model, &exported)?;
    if let Some(v) = outcome.final_val_psnr {
        println!("validation psnr {v:.4} dB");
    }
    println!(
        "export: {} entries, max error {:.4}, {} clamped",
        exported.report.entries, exported.report.max_error, exported.report.clamped
    );
    println!("wrote {}", config.display());
    Ok(())
}

fn cmd_bake(a: BakeArgs) -> Outcome {
    let pattern = lutpool::orientation::KernelPattern::builtin(&a.pattern)
        .ok_or_else(|| usage(format!("unknown pattern {:?}", a.pattern)))?;
    let n = pattern.n();
    let m = (a.scale as usize).pow(2);
    let (kind, arg) = a.oracle.split_once(':').unwrap_or((a.oracle.as_str(), ""));
    let (lut, clamped) = match kind {
        "identity" => bake(|p, out| { out.fill(p[0]); Ok(()) }, a.q, n, m, a.bits, false)?,
        "constant" => {
            let v: f64 = arg.parse().map_err(|_| usage(format!("bad constant {arg:?}")))?;
            bake(move |_, out| { out.fill(v); Ok(()) }, a.q, n, m, a.bits, false)?
        }
        "zero-residual" => bake(|_, out| { out.fill(0.0); Ok(()) }, a.q, n, m, a.bits, true)?,
        "uniform-coeff" => {
            let (lut, c) = bake(|_, out| { out.fill(64.0); Ok(()) }, a.q, 4, 4, a.bits, false)?;
            (lut.with_orientations(4), c)
        }
        _ => return Err(usage(format!("unknown oracle {:?}", a.oracle))),
    };
    let lut = Lut::Quantized(lut);
    lut.write(&a.out)?;
    let h = lut.header();
    println!(
        "wrote {}: q={} n={} m={} {} payload bytes, {clamped} clamped",
        a.out.display(),
        h.q,
        h.n,
        h.m,
        h.payload_bytes()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.train.seed = s;
    }
    let exec = execution(a.sequential);
    let p = &config.pipeline;
    let task = p.task()?;
    let pooling = match a.pooling {
        PoolingKind::Avg => TrainablePooling::Average,
        PoolingKind::Gmp => TrainablePooling::gmp(a.tau, lutpool::harness::config::parse_norm(&p.pooling.norm)?, true),
        PoolingKind::Oap => return Err(usage("train with avg or gmp, then fine-tune with oap")),
    };
    let mut model = TrainableModel::new(
        task,
        p.kernel_patterns()?,
        p.orientation_set()?,
        config.train.q,
        pooling,
        p.residual,
    )
    .map_err(HarnessError::from)?;
    let (train_pairs, val) = load_training_data(&a.data, task.scale())?;
    let tc = config.train.train_config(exec)?;
    let set = TrainSet::new(&train_pairs, task.scale(), model.residual, model.pad(), tc.rotate, tc.flip)
        .map_err(HarnessError::from)?;
    let outcome = train(&mut model, &set, &val, &tc).map_err(HarnessError::from)?;
    write_outcome(&a.out, &model, &outcome, tc.iterations as u64, exec)
}

fn cmd_finetune(a: FinetuneArgs) -> Outcome {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.train.seed = s;
    }
    let exec = execution(a.sequential);
    let ckpt = load_checkpoint(&a.checkpoint).map_err(HarnessError::from)?;
    let mut model = ckpt.model;
    let pooling = match a.pooling {
        PoolingKind::Oap => TrainablePooling::oap_zero(a.coeff_q, model.orientations.k()).map_err(HarnessError::from)?,
        PoolingKind::Gmp => TrainablePooling::gmp(a.tau, Norm::L2, true),
        PoolingKind::Avg => TrainablePooling::Average,
    };
    let scale = model.task.scale();
    let (train_pairs, val) = load_training_data(&a.data, scale)?;
    let ft = config.train.finetune_config(exec)?;
    let set = TrainSet::new(&train_pairs, scale, model.residual, model.pad(), ft.train.rotate, ft.train.flip)
        .map_err(HarnessError::from)?;
    let outcome = finetune(&mut model, pooling, &set, &val, &ft).map_err(HarnessError::from)?;
    if let Some(v) = outcome.initial_val_psnr {
        println!("validation psnr before fine-tuning {v:.4} dB (kept step {})", outcome.kept_step);
    }
    let step = ckpt.step + outcome.kept_step as u64;
    write_outcome(&a.out, &model, &outcome, step, exec)
}

fn cmd_restore(a: RestoreArgs) -> Outcome {
    let config = build_pipeline(&a.pipeline)?;
    std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::io(&a.out, e))?;
    for input in &a.inputs {
        let img = read_gray(input)?;
        let out = restore_image(&img, &config)?;
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let path = a.out.join(format!("{stem}.pgm"));
        write_pgm(&path, &out)?;
        println!("{} -> {}", input.display(), path.display());
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let border = a.scale.map_or(0, usize::from);
    let opts = EvalOptions {
        border,
        block: (a.block > 0).then_some(a.block),
    };
    let (dataset, items) = if let Some(m) = &a.manifest {
        let out = a.out.as_ref().ok_or_else(|| usage("--manifest needs --out <outputs dir>"))?;
        let m = DatasetManifest::load(m)?;
        let split = parse_split(&a.split)?;
        let mut items = Vec::new();
        for it in m.split(split) {
            let output = read_gray(out.join(format!("{}.pgm", it.name())))?;
            items.push((it.name(), read_gray(&it.clean)?, output));
        }
        (m.name.clone(), items)
    } else if let [reference, output] = a.pair.as_slice() {
        let name = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (String::from("pair"), vec![(name, read_gray(reference)?, read_gray(output)?)])
    } else {
        return Err(usage("pass --manifest with --out, or a REFERENCE OUTPUT pair"));
    };
    let report = evaluate_all(&dataset, items.iter().map(|(n, r, o)| (n.clone(), r, o)), opts)?;
    for row in report.rows.iter().chain(report.aggregate().as_ref()) {
        let pb = row.psnr_b.map_or(String::from("-"), |v| format!("{v:.4}"));
        println!("{}\t{}\tpsnr {:.4}\tssim {:.6}\tpsnr_b {pb}", row.dataset, row.image, row.psnr, row.ssim);
    }
    if let Some(path) = &a.report {
        write_metric_csv(&report, path)?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Outcome {
    let config = build_pipeline(&a.pipeline)?;
    let m = DatasetManifest::load(&a.manifest)?;
    let pairs = m.load_pairs(parse_split(&a.split)?)?;
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    }
    let mut report = BenchReport::default();
    for p in &pairs {
        let (row, img) = bench_image(&p.name, &p.degraded, &config, Some(&p.clean))?;
        if let Some(out) = &a.out {
            write_pgm(out.join(format!("{}.pgm", p.name)), &img)?;
        }
        report.push(row);
    }
    let t = report.total();
    println!(
        "{} images: {:.1} ms, {} table queries, {} coefficient queries, {} table bytes, mean psnr {}",
        report.rows.len(),
        t.millis,
        t.lut_queries,
        t.coeff_queries,
        t.table_bytes,
        t.psnr.map_or(String::from("-"), |v| format!("{v:.4} dB"))
    );
    if let Some(path) = &a.report {
        report.write_csv(path)?;
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Outcome {
    for path in &a.luts {
        let h = read_header(path)?;
        let kind = if h.is_float() { "real" } else { "quantized" };
        println!(
            "{}: {kind} q={} n={} m={} k={} bits={} signed={} entries={} payload_bytes={} crc32={:#010x}",
            path.display(),
            h.q,
            h.n,
            h.m,
            h.k,
            h.bit_depth,
            h.is_signed(),
            h.entry_count,
            h.payload_bytes(),
            h.crc32
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Bake(a) => cmd_bake(a),
        Command::Train(a) => cmd_train(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Restore(a) => cmd_restore(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            let code = e.exit_code();
            let kind = if code == 2 { "io" } else { "invalid" };
            eprintln!("error[{kind}]: {e}");
            ExitCode::from(code as u8)
        }
    }
}
