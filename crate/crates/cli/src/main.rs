//! `hffn` command-line tool: model budgets, super-resolution, evaluation,
//! frequency decomposition maps and toy training.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hffn::eval::{evaluate_dir, list_pngs, Upscaler};
use hffn::imaging::{activation_map, load_png, save_png};
use hffn::network::{load_weights, multi_adds_breakdown, save_weights, Ablation, Model, ModelConfig, ParamBreakdown};
use hffn::training::{render_curve_png, train_toy, write_curve_csv, ImagePair, TrainConfig};
use hffn::Error;

#[derive(Parser, Debug)]
#[command(name = "hffn", version, about = "Lightweight single-image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Parameter and Multi-Adds budget of a model configuration.
    Summary(SummaryArgs),
    /// Super-resolve one PNG.
    Sr(SrArgs),
    /// PSNR/SSIM over a directory of HR PNGs.
    Eval(EvalArgs),
    /// Low/high-frequency activation maps of one HFFB.
    Decompose(DecomposeArgs),
    /// Train a small model on a directory of HR PNGs.
    TrainToy(TrainArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AblationArg {
    None,
    NoHfe,
    NoLfde,
    NoLffb,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::None => Ablation::None,
            AblationArg::NoHfe => Ablation::NoHfe,
            AblationArg::NoLfde => Ablation::NoLfde,
            AblationArg::NoLffb => Ablation::NoLffb,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Resolution {
    width: usize,
    height: usize,
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
        let parse = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| format!("bad dimension '{v}'"));
        Ok(Resolution { width: parse(w)?, height: parse(h)? })
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    #[arg(long, default_value_t = 4)]
    scale: usize,
    #[arg(long, default_value_t = 48)]
    channels: usize,
    #[arg(long, default_value_t = 6)]
    n_lffb: usize,
    #[arg(long, default_value_t = 5)]
    m_hffb: usize,
    #[arg(long, default_value_t = 4)]
    cca_reduction: usize,
    #[arg(long, value_enum, default_value_t = AblationArg::None)]
    ablation: AblationArg,
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            scale: self.scale,
            channels: self.channels,
            n_lffb: self.n_lffb,
            m_hffb: self.m_hffb,
            cca_reduction: self.cca_reduction,
            ..ModelConfig::default()
        }
        .with_ablation(self.ablation.into())
    }
}

#[derive(Args, Debug, Serialize)]
struct SummaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// HR output resolution for the Multi-Adds count.
    #[arg(long, default_value = "1280x720")]
    out_res: Resolution,
}

#[derive(Args, Debug, Serialize)]
struct SrArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Average over the 8 flips/rotations of the input.
    #[arg(long)]
    self_ensemble: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Baseline {
    Bicubic,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Weight file; required unless --baseline is given.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    weights: Option<PathBuf>,
    /// Score a reference upscaler instead of a trained model.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long)]
    hr_dir: PathBuf,
    #[arg(long)]
    scale: usize,
    /// JSON report destination.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Name stored in the report; defaults to the directory name.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    self_ensemble: bool,
}

#[derive(Args, Debug, Serialize)]
struct DecomposeArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// HFFB index counted over the whole body.
    #[arg(long)]
    block: usize,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    scale: usize,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_weights: PathBuf,
    /// Loss curve CSV destination.
    #[arg(long)]
    curve: PathBuf,
    /// Optional PNG plot of the loss curve.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    /// LR patch side.
    #[arg(long, default_value_t = 16)]
    patch: usize,
    #[arg(long, default_value_t = 6e-4)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    #[arg(long, default_value_t = 2)]
    n_lffb: usize,
    #[arg(long, default_value_t = 2)]
    m_hffb: usize,
    #[arg(long, default_value_t = 4)]
    cca_reduction: usize,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn validated(cfg: ModelConfig) -> Result<ModelConfig, Failure> {
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn human(n: u64) -> String {
    match n {
        n if n >= 1_000_000_000 => format!("{:.2}G", n as f64 / 1e9),
        n if n >= 1_000_000 => format!("{:.2}M", n as f64 / 1e6),
        n if n >= 1_000 => format!("{:.1}K", n as f64 / 1e3),
        n => n.to_string(),
    }
}

fn summary(args: &SummaryArgs) -> CliResult {
    let cfg = validated(args.model.config())?;
    let model = Model::build(&cfg, 0)?;
    let res = args.out_res;
    println!("model: {cfg}");
    let blocks = model.hffbs().len();
    if cfg.lffb_enabled {
        println!("body: {} LFFBs x {} HFFBs ({blocks} HFFBs)", cfg.n_lffb, cfg.m_hffb);
    } else {
        println!("body: flat chain of {blocks} HFFBs (no LFFB), every {}th output fused", cfg.m_hffb);
    }
    let top = model.breakdown();
    println!("parameters by component:");
    for (name, n) in &top.groups {
        println!("  {name:<16} {n:>9}");
    }
    let (prefix, depth) = if cfg.lffb_enabled { ("lffb.0.hffb.0.", 3) } else { ("hffb.0.", 2) };
    println!("parameters of one HFFB ({}):", prefix.trim_end_matches('.'));
    for (name, n) in ParamBreakdown::grouped(model.params(), depth).filter(prefix) {
        println!("  {:<16} {n:>9}", &name[prefix.len()..]);
    }
    if cfg.lffb_enabled {
        for (name, n) in ParamBreakdown::grouped(model.params(), 2).filter("lffb.0.") {
            if !name.starts_with("lffb.0.hffb.") {
                println!("  lffb {:<11} {n:>9}", &name["lffb.0.".len()..]);
            }
        }
    }
    println!("total parameters: {} ({})", top.total, human(top.total as u64));

    let macs = multi_adds_breakdown(&model, res.height, res.width)?;
    println!("multi-adds by stage at {res}:");
    for (name, n) in &macs.stages {
        println!("  {name:<16} {:>9}", human(*n));
    }
    println!("multi-adds of one HFFB:");
    for (name, n) in &macs.hffb_parts {
        println!("  {name:<16} {:>9}", human(*n));
    }
    println!(
        "mac convention: conv = output elements x input channels x kernel area; transposed conv = input elements x \
         output channels x kernel area; depthwise = output elements x kernel area; elementwise, pooling and shuffles free"
    );
    println!("multi-adds: {} ({}) at {res}", macs.total, human(macs.total));
    Ok(())
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    let model = load_weights(path)?;
    println!("weights: {} [{}], {} parameters", path.display(), model.config(), model.param_count());
    Ok(model)
}

fn sr(args: &SrArgs) -> CliResult {
    let model = load_model(&args.weights)?;
    let lr = load_png(&args.input)?;
    let up = Upscaler::Network { model: &model, self_ensemble: args.self_ensemble };
    let out = up.upscale(&lr)?;
    save_png(&out, &args.output)?;
    println!("wrote {} ({}x{})", args.output.display(), out.width(), out.height());
    Ok(())
}

fn eval(args: &EvalArgs) -> CliResult {
    let model = match &args.weights {
        Some(w) => Some(load_model(w)?),
        None => None,
    };
    let upscaler = match &model {
        Some(m) => {
            if m.config().scale != args.scale {
                return Err(usage(format!("--scale {} but weights are for x{}", args.scale, m.config().scale)));
            }
            Upscaler::Network { model: m, self_ensemble: args.self_ensemble }
        }
        None => {
            if !(1..=4).contains(&args.scale) {
                return Err(usage(format!("--scale must be 1..4, got {}", args.scale)));
            }
            Upscaler::Bicubic { scale: args.scale }
        }
    };
    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.hr_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
    });
    let report = evaluate_dir(&args.hr_dir, &dataset, &upscaler)?;
    println!("{report}");
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()? + "\n").map_err(|e| Error::Io { path: path.clone(), source: e })?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct MapStats {
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct DecomposeMeta {
    block: usize,
    height: usize,
    width: usize,
    channels: usize,
    low: MapStats,
    high: MapStats,
    /// Every high-frequency value was exactly zero before normalisation.
    high_all_zero: bool,
    /// Largest |low + high - input| over the branch input.
    recomposition_max_abs_error: f64,
}

fn decompose(args: &DecomposeArgs) -> CliResult {
    let model = load_model(&args.weights)?;
    let blocks = model.hffbs().len();
    if args.block >= blocks {
        return Err(usage(format!("--block {} out of range, model has {blocks} HFFBs", args.block)));
    }
    let img = load_png(&args.input)?;
    let maps = model.hfe_maps(img.tensor(), args.block)?;
    let (low, low_min, low_max) = activation_map(&maps.low)?;
    let (high, high_min, high_max) = activation_map(&maps.high)?;
    let recomposed = maps.low.add(&maps.high)?;
    let meta = DecomposeMeta {
        block: args.block,
        height: img.height(),
        width: img.width(),
        channels: maps.low.shape().channels,
        low: MapStats { min: low_min, max: low_max },
        high: MapStats { min: high_min, max: high_max },
        high_all_zero: maps.high.data().iter().all(|&v| v == 0.0),
        recomposition_max_abs_error: recomposed.max_abs_diff(&maps.input)?,
    };
    let (low_path, high_path) = (with_suffix(&args.out_prefix, "_low.png"), with_suffix(&args.out_prefix, "_high.png"));
    let meta_path = with_suffix(&args.out_prefix, "_meta.json");
    save_png(&low, &low_path)?;
    save_png(&high, &high_path)?;
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    std::fs::write(&meta_path, text.clone() + "\n").map_err(|e| Error::Io { path: meta_path.clone(), source: e })?;
    println!("wrote {}, {}, {}", low_path.display(), high_path.display(), meta_path.display());
    println!("{text}");
    Ok(())
}

fn train(args: &TrainArgs) -> CliResult {
    let cfg = validated(ModelConfig {
        scale: args.scale,
        channels: args.channels,
        n_lffb: args.n_lffb,
        m_hffb: args.m_hffb,
        cca_reduction: args.cca_reduction,
        ..ModelConfig::default()
    })?;
    let tcfg = TrainConfig {
        batch: args.batch,
        patch: args.patch,
        lr: args.lr,
        steps: args.steps,
        seed: args.seed,
        ..TrainConfig::default()
    };
    tcfg.validate().map_err(|e| usage(e.to_string()))?;

    let mut pairs = Vec::new();
    let mut offenders = Vec::new();
    for path in list_pngs(&args.data_dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let pair = load_png(&path).and_then(|hr| ImagePair::from_hr(name.clone(), &hr, args.scale));
        match pair {
            Ok(p) if p.lr.height() >= args.patch && p.lr.width() >= args.patch => pairs.push(p),
            Ok(p) => offenders.push(format!(
                "{name} (LR {}x{} smaller than patch {})",
                p.lr.width(),
                p.lr.height(),
                args.patch
            )),
            Err(e) => offenders.push(format!("{name} ({e})")),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Data(format!("unusable training images: {}", offenders.join(", "))).into());
    }
    let mut model = Model::build(&cfg, args.seed)?;
    println!("model: {cfg}, {} parameters, {} training images", model.param_count(), pairs.len());
    let every = (args.steps / 10).max(1);
    let losses = train_toy(&mut model, &pairs, &tcfg, |s| {
        if s.step % every == 0 || s.step + 1 == args.steps {
            println!("step {:>6}  loss {:.6}  grad-norm {:.4}", s.step, s.loss, s.grad_norm);
        }
    })?;
    save_weights(&model, &args.out_weights)?;
    write_curve_csv(&args.curve, &losses)?;
    if let Some(plot) = &args.plot {
        render_curve_png(plot, &losses)?;
    }
    println!("wrote {} and {}", args.out_weights.display(), args.curve.display());
    Ok(())
}

impl Command {
    /// Files this command writes.
    fn outputs(&self) -> Vec<&Path> {
        match self {
            Command::Summary(_) => vec![],
            Command::Sr(a) => vec![a.output.as_path()],
            Command::Eval(a) => a.report.iter().map(PathBuf::as_path).collect(),
            Command::Decompose(a) => vec![a.out_prefix.as_path()],
            Command::TrainToy(a) => {
                [Some(&a.out_weights), Some(&a.curve), a.plot.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect()
            }
        }
    }
}

/// Creates the parent directory of every output so fresh paths work.
fn create_parents(cmd: &Command) -> Result<(), Failure> {
    for path in cmd.outputs() {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numeric() => 3,
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    println!("config {}", serde_json::to_string(&cli.command).expect("arguments serialise"));
    let result = create_parents(&cli.command).and_then(|()| match &cli.command {
        Command::Summary(a) => summary(a),
        Command::Sr(a) => sr(a),
        Command::Eval(a) => eval(a),
        Command::Decompose(a) => decompose(a),
        Command::TrainToy(a) => train(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
