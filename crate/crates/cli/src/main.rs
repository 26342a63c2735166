use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use irsr::backends::{wire, BackendSpec, BuiltinBackend, BuiltinKind};
use irsr::ensemble::{Blend, BranchConfig, FusionWeights, PipelineConfig, TileConfig};
use irsr::harness::{
    build_manifest, emit_report, evaluate_dirs, fuse_dirs, montage, render_report, restore_dir,
    run_eval, synthesize_lr, write_synth_demo, EvalOptions, MontageColumn, Report, ReportFormat,
};
use irsr::metrics::MetricConfig;
use irsr::resample::KernelSpec;

#[derive(Parser)]
#[command(
    name = "irsr",
    version,
    about = "Thermal-infrared super-resolution toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct KernelArgs {
    /// Keys cubic parameter.
    #[arg(long = "kernel-a", default_value_t = -0.5, allow_hyphen_values = true)]
    kernel_a: f64,
    /// Disable kernel widening when downsampling.
    #[arg(long)]
    no_antialias: bool,
}

impl KernelArgs {
    fn spec(self) -> KernelSpec {
        KernelSpec {
            a: self.kernel_a,
            antialias: !self.no_antialias,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize LR inputs from an HR directory.
    Degrade {
        #[arg(long)]
        hr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Restore every image in a directory with one backend.
    Restore {
        /// bicubic, nearest, blur-bicubic, identity1x or "ext:CMD ARGS".
        #[arg(long)]
        backend: String,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Tile size on the LR grid; omit to process whole images.
        #[arg(long)]
        tile: Option<usize>,
        #[arg(long, default_value_t = 16, requires = "tile")]
        overlap: usize,
        #[arg(long, default_value = "tent", requires = "tile")]
        blend: String,
        #[arg(long)]
        self_ensemble: bool,
        /// Per-request timeout for external backends, in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Weighted per-pixel fusion of same-named images.
    Fuse {
        /// Comma-separated weights summing to 1.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score SR images against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        sr: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 4)]
        shave: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Degrade (if needed), restore, fuse and score a dataset.
    Pipeline {
        /// TOML pipeline description.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        hr: PathBuf,
        /// Existing LR inputs paired by stem; synthesized into OUT/lr otherwise.
        #[arg(long)]
        lr: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long, default_value_t = 4)]
        shave: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Qualitative comparison grid.
    Montage {
        /// label=DIR pairs.
        #[arg(long, value_delimiter = ',', required = true)]
        cols: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        names: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// LR cells whose size times this factor matches the row are upscaled.
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
    /// Write the bundled synthetic HR set.
    SynthDemo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Serve a built-in backend over irsr/1 on stdin/stdout.
    Serve {
        #[arg(long, default_value = "identity1x")]
        backend: String,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Channel count announced at handshake.
        #[arg(long, default_value_t = 1)]
        channels: usize,
    },
}

fn report_format(s: &str) -> Result<ReportFormat> {
    Ok(s.parse::<ReportFormat>()?)
}

/// Writes the report and prints the table; partial reports fail the command.
fn finish_report(report: &Report, path: &Path, fmt: ReportFormat) -> Result<ExitCode> {
    if report.images.is_empty() {
        for f in &report.failures {
            eprintln!("{}: {}", f.name, f.cause);
        }
        bail!("every entry failed; no report written");
    }
    emit_report(report, fmt, path)?;
    print!("{}", render_report(report, ReportFormat::Table)?);
    if report.partial {
        for f in &report.failures {
            eprintln!("failed: {}: {}", f.name, f.cause);
        }
        eprintln!("report is partial ({} failures)", report.failures.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Degrade {
            hr,
            out,
            scale,
            kernel,
        } => {
            let m = build_manifest(&hr, None, scale)?;
            let m = synthesize_lr(&m, &out, &kernel.spec())?;
            println!("wrote {} LR images to {}", m.entries.len(), out.display());
        }
        Command::Restore {
            backend,
            scale,
            tile,
            overlap,
            blend,
            self_ensemble,
            timeout,
            input,
            out,
            workers,
        } => {
            let spec: BackendSpec = backend.parse()?;
            let mut branch =
                BranchConfig::new(spec.to_string(), spec).with_self_ensemble(self_ensemble);
            branch = match tile {
                Some(tile) => branch.with_tiling(TileConfig {
                    tile,
                    overlap,
                    blend: blend.parse::<Blend>()?,
                }),
                None => branch.without_tiling(),
            };
            branch.timeout_secs = timeout;
            let cfg = PipelineConfig::new(scale, vec![branch]);
            let outcomes = restore_dir(&cfg, &input, &out, workers)?;
            let mut failed = 0;
            for (name, r) in &outcomes {
                if let Err(e) = r {
                    eprintln!("failed: {name}: {e}");
                    failed += 1;
                }
            }
            println!(
                "restored {} of {} images",
                outcomes.len() - failed,
                outcomes.len()
            );
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Fuse { weights, dirs, out } => {
            let w = FusionWeights::new(weights)?;
            let written = fuse_dirs(&dirs, &w, &out)?;
            println!("fused {} images into {}", written.len(), out.display());
        }
        Command::Eval {
            gt,
            sr,
            scale,
            shave,
            report,
            format,
        } => {
            let fmt = report_format(&format)?;
            let mc = MetricConfig {
                shave,
                ..MetricConfig::default()
            };
            let r = evaluate_dirs(&gt, &sr, scale, &mc)?;
            return finish_report(&r, &report, fmt);
        }
        Command::Pipeline {
            config,
            hr,
            lr,
            out,
            report,
            format,
            shave,
            workers,
        } => {
            let fmt = report_format(&format)?;
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = PipelineConfig::from_toml(&text)?;
            let m = match lr {
                Some(lr) => build_manifest(&hr, Some(&lr), cfg.scale)?,
                None => synthesize_lr(
                    &build_manifest(&hr, None, cfg.scale)?,
                    &out.join("lr"),
                    &cfg.kernel,
                )?,
            };
            let mc = MetricConfig {
                shave,
                ..MetricConfig::default()
            };
            let opts = EvalOptions {
                workers,
                sr_dir: Some(out.join("sr")),
            };
            let r = run_eval(&m, &cfg, &mc, &opts)?;
            return finish_report(&r, &report, fmt);
        }
        Command::Montage {
            cols,
            names,
            out,
            scale,
        } => {
            let columns = cols
                .iter()
                .map(|c| {
                    let (label, dir) = c
                        .split_once('=')
                        .with_context(|| format!("column `{c}` is not label=DIR"))?;
                    Ok(MontageColumn::new(label, dir))
                })
                .collect::<Result<Vec<_>>>()?;
            let path = montage(&columns, &names, &out, scale)?;
            println!("wrote {}", path.display());
        }
        Command::SynthDemo { out, count, seed } => {
            if count == 0 {
                bail!("--count must be at least 1");
            }
            let written = write_synth_demo(&out, count, seed)?;
            println!(
                "wrote {} synthetic HR images to {}",
                written.len(),
                out.display()
            );
        }
        Command::Serve {
            backend,
            scale,
            channels,
        } => {
            let kind: BuiltinKind = backend.parse()?;
            let b = BuiltinBackend::new(kind, scale, KernelSpec::default())?;
            let stdin = io::stdin();
            let stdout = io::stdout();
            let mut reader = BufReader::new(stdin.lock());
            let mut writer = BufWriter::new(stdout.lock());
            wire::serve(&b, channels, &mut reader, &mut writer)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
