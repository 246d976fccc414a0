use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stressdet::ErrorClass;

mod commands;
mod settings;

use settings::{Settings, THREADS_ENV};

/// Crop-stress detection toolkit: dataset checks, augmentation, anchor
/// layout, forward-graph shape checks, post-processing, pixel-wise
/// evaluation and overlays.
///
/// Exit status: 0 success, 2 configuration error, 3 parse error, 4 IO
/// error, 5 invariant failure.
#[derive(Parser)]
#[command(name = "stressdet", version)]
struct Cli {
    /// File of `key = value` settings. Flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. Defaults to $STRESSDET_THREADS, else one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Class names and ids, as `healthy:0,stressed:1`.
    #[arg(long, global = true)]
    classes: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ThresholdArgs {
    /// Detections scoring below this are dropped [default: 0.7].
    #[arg(long)]
    score_threshold: Option<f64>,
    /// Same-class boxes overlapping more than this are suppressed [default: 0.3].
    #[arg(long)]
    nms_iou: Option<f64>,
}

#[derive(Args, Default)]
struct SizeArgs {
    /// Network input as `N` or `HxW`, multiples of 32 [default: 672].
    #[arg(long)]
    input_size: Option<String>,
}

#[derive(Args, Default)]
struct AugmentArgs {
    #[arg(long)]
    rescale_lo: Option<f64>,
    #[arg(long)]
    rescale_hi: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_gain: Option<f64>,
    #[arg(long)]
    sigmoid_cutoff: Option<f64>,
    #[arg(long)]
    sigmoid_gain: Option<f64>,
    #[arg(long)]
    noise_mean: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Pair images with annotations in a directory and check every label.
    Validate {
        root: PathBuf,
        /// Split name recorded in the written manifest.
        #[arg(long, default_value = "train")]
        split: String,
        /// Write the pairing as a manifest file.
        #[arg(long)]
        write_manifest: Option<PathBuf>,
    },
    /// Write the original plus four photometric variants of every training image.
    Augment {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: AugmentArgs,
    },
    /// Print the anchor grid of every pyramid level.
    Anchors {
        #[command(flatten)]
        size: SizeArgs,
        /// Write every anchor box as a table.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Score-filter and suppress a raw detections table, per image.
    Postprocess {
        detections: PathBuf,
        /// Output table; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Pixel-wise DSC, IoU, precision and recall of detections against ground truth.
    Eval {
        /// Manifest file or dataset directory.
        ground_truth: PathBuf,
        detections: PathBuf,
        /// Also report every image separately.
        #[arg(long)]
        per_image: bool,
        /// Average per-image metrics instead of pooling pixel counts.
        #[arg(long)]
        image_average: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace layer shapes through the backbone, pyramid and heads.
    ForwardCheck {
        #[command(flatten)]
        size: SizeArgs,
        /// Build the lateral convolution of stage C<N> with the wrong width.
        #[arg(long, value_name = "N")]
        fault_lateral: Option<usize>,
        /// Also run the numeric forward pass on a seeded random image.
        #[arg(long)]
        compute: bool,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Draw detection boxes on an image: healthy blue, stressed yellow.
    Overlay {
        image: PathBuf,
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rows of the table to draw [default: the image file stem].
        #[arg(long)]
        image_id: Option<String>,
    },
    /// Stack three of the G, R, RE and NIR band images into one RGB image.
    ComposeBands {
        #[arg(long)]
        green: PathBuf,
        #[arg(long)]
        red: PathBuf,
        #[arg(long)]
        red_edge: PathBuf,
        #[arg(long)]
        nir: PathBuf,
        /// Output channel order, such as R-G-NIR.
        #[arg(long)]
        select: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn flag<T: ToString>(key: &'static str, v: &Option<T>) -> (&'static str, Option<String>) {
    (key, v.as_ref().map(T::to_string))
}

fn settings(cli: &Cli) -> anyhow::Result<Settings> {
    let mut flags = vec![
        flag("threads", &cli.threads),
        flag("seed", &cli.seed),
        flag("classes", &cli.classes),
    ];
    let (thresholds, size, aug) = match &cli.command {
        Command::Postprocess { thresholds, .. } => (Some(thresholds), None, None),
        Command::ForwardCheck { size, thresholds, .. } => (Some(thresholds), Some(size), None),
        Command::Anchors { size, .. } => (None, Some(size), None),
        Command::Augment { params, .. } => (None, None, Some(params)),
        _ => (None, None, None),
    };
    if let Some(t) = thresholds {
        flags.push(flag("score_threshold", &t.score_threshold));
        flags.push(flag("nms_iou", &t.nms_iou));
    }
    if let Some(s) = size {
        flags.push(flag("input_size", &s.input_size));
    }
    if let Some(a) = aug {
        flags.extend([
            flag("rescale_lo", &a.rescale_lo),
            flag("rescale_hi", &a.rescale_hi),
            flag("gamma", &a.gamma),
            flag("gamma_gain", &a.gamma_gain),
            flag("sigmoid_cutoff", &a.sigmoid_cutoff),
            flag("sigmoid_gain", &a.sigmoid_gain),
            flag("noise_mean", &a.noise_mean),
            flag("noise_std", &a.noise_std),
        ]);
    }
    let env = std::env::var(THREADS_ENV).ok();
    Ok(Settings::resolve(cli.config.as_deref(), env, &flags)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let s = settings(&cli)?;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Validate {
            root,
            split,
            write_manifest,
        } => commands::validate(&s, &root, &split, write_manifest.as_deref()),
        Command::Augment { manifest, out, .. } => commands::augment(&s, &manifest, &out),
        Command::Anchors { dump, .. } => commands::anchors(&s, dump.as_deref()),
        Command::Postprocess { detections, out, .. } => commands::postprocess(&s, &detections, out.as_deref()),
        Command::Eval {
            ground_truth,
            detections,
            per_image,
            image_average,
            out,
        } => commands::eval(&s, &ground_truth, &detections, per_image, image_average, out.as_deref()),
        Command::ForwardCheck {
            fault_lateral, compute, ..
        } => commands::forward_check(&s, fault_lateral, compute),
        Command::Overlay {
            image,
            detections,
            out,
            image_id,
        } => commands::overlay(&s, &image, &detections, &out, image_id.as_deref()),
        Command::ComposeBands {
            green,
            red,
            red_edge,
            nir,
            select,
            out,
        } => commands::compose_bands(&green, &red, &red_edge, &nir, &select, &out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<stressdet::Error>())
        .map(|e| match e.class() {
            ErrorClass::Config => 2,
            ErrorClass::Parse => 3,
            ErrorClass::Io => 4,
            ErrorClass::Invariant => 5,
        })
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already print their source, so skip repeats
            let mut msg = String::new();
            for cause in e.chain() {
                let part = cause.to_string();
                if !msg.contains(&part) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&part);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
