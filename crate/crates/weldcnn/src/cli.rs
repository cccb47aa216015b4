//! The `weldcnn` command line.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use weldcnn_core::augment::{random_augment, AugmentConfig};
use weldcnn_core::nn::build_paper_model;
use weldcnn_core::rng;
use weldcnn_core::train::{evaluate, predict, train_with, TrainConfig};

use crate::dataset::{load_dataset, to_model_input, write_synthetic};
use crate::image_io::{read_image, write_ppm};
use crate::metrics::write_metrics_csv;
use crate::model_io::{load_model, save_model};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "weldcnn",
    version,
    about = "Classify friction-stir-weld microstructure images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-class dataset of PPM images
    Synth(SynthArgs),
    /// Write randomly augmented variants of one image
    Augment(AugmentArgs),
    /// Train the classifier on a dataset directory
    Train(TrainArgs),
    /// Report loss, accuracy and confusion counts on a dataset directory
    Eval(EvalArgs),
    /// Classify a single image
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub per_class: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Horizontal shift range in pixels, `LO,HI`
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub width_shift: Option<(f64, f64)>,
    /// Vertical shift range as a fraction of the height, `LO,HI`
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub height_shift: Option<(f64, f64)>,
    /// Maximum absolute rotation in degrees
    #[arg(long, allow_hyphen_values = true)]
    pub rotation: Option<f64>,
    /// Brightness factor range, `LO,HI`
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub brightness: Option<(f64, f64)>,
    /// Zoom factor range, `LO,HI`
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub zoom: Option<(f64, f64)>,
    #[arg(long)]
    pub no_hflip: bool,
    /// Value for pixels mapped from outside the source image
    #[arg(long, allow_hyphen_values = true)]
    pub fill: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub val_fraction: Option<f64>,
    /// Augment training samples with the default ranges
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<weldcnn_core::Error> for Failure {
    fn from(e: weldcnn_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Outcome {
    writeln!(out, "{line}").map_err(|e| Failure::Runtime(format!("writing output: {e}")))
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Outcome {
    let files = write_synthetic(&a.out, a.per_class as usize, a.seed)?;
    emit(
        out,
        format_args!("wrote {} images to {}", files.len(), a.out.display()),
    )
}

fn augment_config(a: &AugmentArgs) -> AugmentConfig {
    let mut cfg = AugmentConfig {
        seed: a.seed,
        ..AugmentConfig::default()
    };
    if let Some(r) = a.width_shift {
        cfg.width_shift = r;
    }
    if let Some(r) = a.height_shift {
        cfg.height_shift = r;
    }
    if let Some(r) = a.rotation {
        cfg.rotation_max_deg = r;
    }
    if let Some(r) = a.brightness {
        cfg.brightness = r;
    }
    if let Some(r) = a.zoom {
        cfg.zoom = r;
    }
    if let Some(v) = a.fill {
        cfg.fill_value = v;
    }
    cfg.allow_hflip = !a.no_hflip;
    cfg
}

fn augment(a: &AugmentArgs, out: &mut dyn Write) -> Outcome {
    let cfg = augment_config(a);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let img = read_image(&a.input)?;
    fs::create_dir_all(&a.out).map_err(|e| crate::Error::io(&a.out, e))?;
    for i in 0..a.count {
        let mut r = rng::seeded(rng::derive_seed(cfg.seed, i as u64));
        let variant = random_augment(&img, &cfg, &mut r)?;
        write_ppm(&a.out.join(format!("aug_{i}.ppm")), &variant)?;
    }
    emit(
        out,
        format_args!("wrote {} variants to {}", a.count, a.out.display()),
    )
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch.unwrap_or(d.batch_size),
        lr: a.lr.unwrap_or(d.lr),
        momentum: a.momentum.unwrap_or(d.momentum),
        seed: a.seed.unwrap_or(d.seed),
        val_fraction: a.val_fraction.unwrap_or(d.val_fraction),
        augment: a.augment.then(|| AugmentConfig {
            seed: a.seed.unwrap_or(d.seed),
            ..AugmentConfig::default()
        }),
    }
}

fn train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let cfg = train_config(a);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let loaded = load_dataset(&a.data)?;
    for s in &loaded.skipped {
        let _ = writeln!(err, "warning: skipped {}: {}", s.path.display(), s.reason);
    }
    let model = build_paper_model(cfg.seed);
    let (model, history) = train_with(model, &loaded.dataset, &cfg, |epoch, m| {
        let _ = writeln!(
            err,
            "epoch {epoch}/{}: train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6}",
            cfg.epochs, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
    })?;
    save_model(&model, &a.model)?;
    write_metrics_csv(&a.metrics, &history)?;
    let m = history.last().expect("at least one epoch");
    emit(
        out,
        format_args!(
            "epoch={} train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6}",
            history.len(),
            m.train_loss,
            m.train_acc,
            m.val_loss,
            m.val_acc
        ),
    )
}

fn eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let model = load_model(&a.model)?;
    let loaded = load_dataset(&a.data)?;
    for s in &loaded.skipped {
        let _ = writeln!(err, "warning: skipped {}: {}", s.path.display(), s.reason);
    }
    let e = evaluate(&model, &loaded.dataset)?;
    let c = e.confusion;
    emit(
        out,
        format_args!(
            "loss={:.6} accuracy={:.6} tp={} fp={} fn={} tn={}",
            e.loss, e.accuracy, c.tp, c.fp, c.fn_, c.tn
        ),
    )
}

fn predict_cmd(a: &PredictArgs, out: &mut dyn Write) -> Outcome {
    let model = load_model(&a.model)?;
    let img = to_model_input(read_image(&a.image)?)?;
    let p = predict(&model, &img)?;
    emit(
        out,
        format_args!("class={} p={:.6}", p.label, p.probability),
    )
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Synth(a) => synth(a, out),
        Command::Augment(a) => augment(a, out),
        Command::Train(a) => train(a, out, err),
        Command::Eval(a) => eval(a, out, err),
        Command::Predict(a) => predict_cmd(a, out),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-0.5, 0.5"), Ok((-0.5, 0.5)));
        assert!(parse_range("1").is_err());
        assert!(parse_range("a,1").is_err());
    }

    #[test]
    fn clap_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn help_is_success() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["weldcnn", "--help"], &mut out, &mut err), EXIT_OK);
        assert!(String::from_utf8(out).unwrap().contains("predict"));
    }
}
