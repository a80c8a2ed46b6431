use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use scenetext::config::{read_config, PipelineConfig};
use scenetext::dataset::{
    annotation_ids, extract_patches, load_annotation, mine_line_windows, mine_region_patches,
    read_manifest, read_patch_set, save_annotation, write_patch_set, Annotation, PatchDataset,
};
use scenetext::eval::EvalReport;
use scenetext::filtering::{standardize, window_features};
use scenetext::imaging::read_image;
use scenetext::pipeline::{check_models, detect, Models};
use scenetext::svm::{read_model, train_detailed, write_model, KernelSpec, TrainConfig};
use scenetext::synth::{scene_seed, write_corpus, SynthConfig};

#[derive(Parser)]
#[command(
    name = "scenetext",
    version,
    about = "Urdu scene-text detection: data, training, detection, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene corpus with line-level ground truth.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Scenes held out in test.txt; defaults to a fifth of the corpus.
        #[arg(long)]
        test: Option<usize>,
    },
    /// Build labelled patch sets for the region and line classifiers.
    ExtractPatches {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        neg_ratio: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to the ids listed in this file.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where region patches come from.
        #[arg(long, value_enum, default_value_t = PatchSource::Regions)]
        patch_source: PatchSource,
        /// Jittered copies of each annotated line among the line positives.
        #[arg(long, default_value_t = 2)]
        jitter: usize,
    },
    /// Train the region (`patch`) or line (`line`) classifier.
    Train {
        #[arg(long)]
        patches: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, value_enum, default_value_t = Kernel::Poly)]
        kernel: Kernel,
        #[arg(long, default_value_t = 3)]
        degree: u32,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Detect text lines in one image.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        patch_model: PathBuf,
        #[arg(long)]
        line_model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the boxes surviving each stage here.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
    },
    /// Score detections against ground truth by overlap ratio.
    Eval {
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PatchSource {
    /// Detector candidates inside or clear of annotated lines.
    Regions,
    /// Annotated boxes and random crops.
    Gt,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Patch,
    Line,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Poly,
    Rbf,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(read_config(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn ids_for(dir: &Path, manifest: Option<&Path>) -> Result<Vec<String>> {
    Ok(match manifest {
        Some(m) => read_manifest(m)?,
        None => annotation_ids(dir)?,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes through a sibling temporary file so readers never see a partial
/// file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn synth(count: usize, seed: u64, out: &Path, test: Option<usize>) -> Result<()> {
    let test = test.unwrap_or(count / 5);
    let base = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let (train, test) = write_corpus(out, &base, count, test)?;
    eprintln!(
        "wrote {} scenes to {} ({} train, {} test)",
        count,
        out.display(),
        train.len(),
        test.len()
    );
    println!("scenes={count}\ntrain={}\ntest={}", train.len(), test.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn extract(
    images: &Path,
    gt: &Path,
    out: &Path,
    neg_ratio: usize,
    seed: u64,
    manifest: Option<&Path>,
    config: Option<&Path>,
    source: PatchSource,
    jitter: usize,
) -> Result<()> {
    let cfg = load_config(config)?;
    let ids = ids_for(gt, manifest)?;
    if ids.is_empty() {
        bail!("no annotations found in {}", gt.display());
    }
    let mut patches = PatchDataset::new(cfg.patch.width, cfg.patch.height);
    let mut lines = PatchDataset::new(cfg.hog.window_w, cfg.hog.window_h);
    for (i, id) in ids.iter().enumerate() {
        let img = read_image(images.join(format!("{id}.ppm")))?;
        let mut ann = load_annotation(gt.join(format!("{id}.txt")))?;
        ann.image_id = id.clone();
        let s = scene_seed(seed, i as u64);
        patches.append(match source {
            PatchSource::Regions => mine_region_patches(&img, &ann, &cfg, neg_ratio, s)?,
            PatchSource::Gt => extract_patches(&img, &ann, neg_ratio, s, &cfg.patch)?,
        });
        lines.append(mine_line_windows(&img, &ann, &cfg, neg_ratio, jitter, s)?);
    }
    create_dir(out)?;
    write_patch_set(out, "patch", &patches)?;
    write_patch_set(out, "line", &lines)?;
    let warnings = patches.warnings + lines.warnings;
    if warnings > 0 {
        eprintln!("warning: {warnings} negatives could not be placed");
    }
    eprintln!(
        "{} images: {} text / {} non-text patches, {} text / {} non-text lines",
        ids.len(),
        patches.positives.len(),
        patches.negatives.len(),
        lines.positives.len(),
        lines.negatives.len()
    );
    println!(
        "images={}\npatch_pos={}\npatch_neg={}\nline_pos={}\nline_neg={}\nwarnings={warnings}",
        ids.len(),
        patches.positives.len(),
        patches.negatives.len(),
        lines.positives.len(),
        lines.negatives.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    patches: &Path,
    target: Target,
    kernel: Kernel,
    degree: u32,
    c: f64,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let (name, fingerprint) = match target {
        Target::Patch => ("patch", cfg.patch.fingerprint()),
        Target::Line => ("line", cfg.hog.fingerprint()),
    };
    let set = read_patch_set(patches, name)?;
    let data = match target {
        Target::Patch => set.labelled(|p| Ok(standardize(p.data())))?,
        Target::Line => set.labelled(|w| window_features(w, &cfg.hog))?,
    };
    let dim = data
        .first()
        .map(|(x, _)| x.len())
        .context("empty patch set")?;
    let spec = match kernel {
        Kernel::Poly => KernelSpec::polynomial(degree, dim),
        Kernel::Rbf => KernelSpec::rbf(dim),
    };
    let tc = TrainConfig {
        seed,
        ..TrainConfig::with_c(c)
    };
    eprintln!(
        "training {name} classifier on {} samples ({dim} features)",
        data.len()
    );
    let trained = train_detailed(&data, spec, &tc)?;
    let mut model = trained.model;
    model.features = Some(fingerprint);
    let accuracy = scenetext::eval::classifier_accuracy(&model, &data)?;
    write_model(out, &model)?;
    eprintln!(
        "{} support vectors after {} sweeps, training accuracy {accuracy:.4}",
        model.support_vectors.len(),
        trained.sweeps
    );
    println!(
        "samples={}\nsupport_vectors={}\ntraining_accuracy={accuracy:.6}",
        data.len(),
        model.support_vectors.len()
    );
    Ok(())
}

fn detect_one(
    image: &Path,
    patch_model: &Path,
    line_model: &Path,
    config: &Path,
    out: &Path,
    debug_dir: Option<&Path>,
) -> Result<()> {
    let cfg = read_config(config)?;
    let models = Models {
        patch: read_model(patch_model)?,
        line: read_model(line_model)?,
    };
    check_models(&models, &cfg)?;
    let img = read_image(image)?;
    let id = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let result = detect(&img, &id, &models, &cfg)?;
    let ann = Annotation::new(id.clone(), result.bboxes());
    write_atomic(out, &ann.to_text())?;
    if let Some(dir) = debug_dir {
        create_dir(dir)?;
        for (i, stage) in result.trace.iter().enumerate() {
            let dump = Annotation::new(id.clone(), stage.boxes.clone());
            let path = dir.join(format!("{:02}_{}.txt", i + 1, stage.stage));
            save_annotation(&path, &dump)?;
        }
    }
    eprintln!("{id}: {} lines", result.boxes.len());
    println!("image={id}\nlines={}", result.boxes.len());
    Ok(())
}

fn evaluate(det: &Path, gt: &Path, threshold: f64, manifest: Option<&Path>) -> Result<()> {
    let ids = ids_for(gt, manifest)?;
    let mut pairs = Vec::with_capacity(ids.len());
    for id in &ids {
        let truth = load_annotation(gt.join(format!("{id}.txt")))?;
        let found = load_annotation(det.join(format!("{id}.txt")))?;
        pairs.push((id.clone(), truth.boxes, found.boxes));
    }
    let report = EvalReport::evaluate(
        pairs
            .iter()
            .map(|(id, g, d)| (id.as_str(), g.as_slice(), d.as_slice())),
        threshold,
    );
    eprint!("{}", report.to_table());
    print!("{}", report.to_key_values());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            count,
            seed,
            out,
            test,
        } => synth(count, seed, &out, test),
        Command::ExtractPatches {
            images,
            gt,
            out,
            neg_ratio,
            seed,
            manifest,
            config,
            patch_source,
            jitter,
        } => extract(
            &images,
            &gt,
            &out,
            neg_ratio,
            seed,
            manifest.as_deref(),
            config.as_deref(),
            patch_source,
            jitter,
        ),
        Command::Train {
            patches,
            target,
            kernel,
            degree,
            c,
            seed,
            out,
            config,
        } => train(
            &patches,
            target,
            kernel,
            degree,
            c,
            seed,
            &out,
            config.as_deref(),
        ),
        Command::Detect {
            image,
            patch_model,
            line_model,
            config,
            out,
            debug_dir,
        } => detect_one(
            &image,
            &patch_model,
            &line_model,
            &config,
            &out,
            debug_dir.as_deref(),
        ),
        Command::Eval {
            det,
            gt,
            threshold,
            manifest,
        } => evaluate(&det, &gt, threshold, manifest.as_deref()),
    }
}

/// Configuration problems are usage errors; everything else is a domain
/// failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<scenetext::Error>() {
        Some(scenetext::Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
