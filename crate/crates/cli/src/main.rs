use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};

use seistex::attr::Descriptor;
use seistex::classify::read_bundle;
use seistex::eval::{confusion_matrix, metrics, render_labels, write_ppm};
use seistex::grid::{normalize_section, read_sgrid};
use seistex::histogram::DescriptorId;
use seistex::labels::{ClassSet, LabelGrid};
use seistex::pipeline::{
    harvest_patches, label_section, load_sections, resolve_exemplars, train_pipeline, write_manifest, HarvestParams,
    LabelParams, PipelineConfig,
};
use seistex::{selftest, Error};

#[derive(Parser, Debug)]
#[command(name = "seistex", version, about = "Texture-based labeling of 2D seismic sections")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    descriptor: Option<DescriptorId>,
    #[arg(long)]
    patch_size: Option<usize>,
    /// Superpixel seed spacing in pixels.
    #[arg(long)]
    seed_grid: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Harvest training windows and write a manifest.
    Harvest {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harvest, train and write the model bundle.
    Train {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a section with a trained model.
    Label {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        section: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predicted label grid against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        classes: Option<ClassSet>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a label grid as a PPM image.
    Render {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        classes: Option<ClassSet>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Section drawn underneath the labels.
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { LevelFilter::Info } else { LevelFilter::Warn })
        .init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 1;
        }
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn load_config(common: &Overrides) -> seistex::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(d) = common.descriptor {
        cfg.descriptor = d;
    }
    if let Some(p) = common.patch_size {
        cfg.patch_size = p;
    }
    if let Some(s) = common.seed_grid {
        cfg.slic.region_size = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn class_set(explicit: Option<ClassSet>, config: Option<&Path>) -> seistex::Result<ClassSet> {
    match (explicit, config) {
        (Some(c), _) => Ok(c),
        (None, Some(path)) => Ok(PipelineConfig::load(path)?.classes),
        (None, None) => Ok(ClassSet::Structures),
    }
}

fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".sgrid").map(str::to_string).unwrap_or(name)
}

fn execute(command: Command) -> seistex::Result<()> {
    match command {
        Command::Harvest { common, out } => {
            let cfg = load_config(&common)?;
            cfg.require_training_inputs()?;
            let sections = load_sections(&cfg.sections)?;
            let exemplars = resolve_exemplars(&cfg, &sections)?;
            let params = HarvestParams {
                per_class: cfg.per_class,
                stride: cfg.stride,
            };
            let set = harvest_patches(&sections, &exemplars, &params)?;
            let path = out.unwrap_or_else(|| cfg.output.clone().unwrap_or_default().join("harvest.manifest"));
            write_manifest(&path, &set)?;
            for &k in &set.short_classes {
                warn!(
                    "class {} has {} of {} patches",
                    cfg.classes.names()[k],
                    set.per_class[k].len(),
                    cfg.per_class
                );
            }
            info!("wrote {} entries to {}", set.len(), path.display());
        }
        Command::Train { common, out } => {
            let mut cfg = load_config(&common)?;
            if let Some(out) = out {
                cfg.model = out;
            }
            let outcome = train_pipeline(&cfg)?;
            for (k, r) in outcome.reports.iter().enumerate() {
                if !r.converged {
                    warn!("class {} stopped after {} epochs without converging", cfg.classes.names()[k], r.epochs);
                }
            }
        }
        Command::Label { common, section, out } => {
            let cfg = load_config(&common)?;
            let model = read_bundle(&cfg.model)?;
            let grid = normalize_section(&read_sgrid(&section)?);
            let labels = label_section(&grid, &model, &Descriptor::new(cfg.descriptor), &LabelParams::from(&cfg))?;
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| section.parent().map(Path::to_path_buf).unwrap_or_default());
            let base = stem(&section);
            let grid_path = dir.join(format!("{base}.labels.sgrid"));
            labels.write(&grid_path)?;
            let ppm = render_labels(&labels, cfg.classes, None)?;
            write_ppm(dir.join(format!("{base}.labels.ppm")), &ppm)?;
            info!("labels written to {}", grid_path.display());
        }
        Command::Evaluate {
            pred,
            truth,
            classes,
            config,
            out,
        } => {
            let classes = class_set(classes, config.as_deref())?;
            let cm = confusion_matrix(&LabelGrid::read(&pred)?, &LabelGrid::read(&truth)?, classes.len())?;
            let report = metrics(&cm)?.to_text();
            match out {
                Some(path) => std::fs::write(&path, &report).map_err(|e| Error::Io { path, source: e })?,
                None => {
                    let _ = std::io::stdout().write_all(report.as_bytes());
                }
            }
        }
        Command::Render {
            labels,
            classes,
            config,
            background,
            out,
        } => {
            let classes = class_set(classes, config.as_deref())?;
            let grid = LabelGrid::read(&labels)?;
            let bg = background.map(read_sgrid).transpose()?;
            let ppm = render_labels(&grid, classes, bg.as_ref())?;
            let path = out.unwrap_or_else(|| labels.with_file_name(format!("{}.ppm", stem(&labels))));
            write_ppm(&path, &ppm)?;
        }
        Command::Selftest => {
            let results = selftest::run_all();
            let mut stdout = std::io::stdout();
            for r in &results {
                let status = if r.passed { "PASS" } else { "FAIL" };
                let _ = if r.detail.is_empty() {
                    writeln!(stdout, "{status} {}", r.name)
                } else {
                    writeln!(stdout, "{status} {} ({})", r.name, r.detail)
                };
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Error::InvalidArgument(format!("{failed} self-test checks failed")));
            }
        }
    }
    Ok(())
}
