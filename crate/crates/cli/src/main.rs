use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use occseg::evaluation::dataset::{image_path, mask_path};
use occseg::evaluation::{
    fppi_recall, gen_synthetic, overlay_svg, rasterize_cells, read_annotations, read_detections, read_mask,
    refine_mask, voc_seg_error, write_dataset, write_detections, Annotation, DetectionRecord, OverlayItem, PixelMask,
    ScoredBox, SynthConfig,
};
use occseg::imaging::{load_image, segment_unsupervised, ImageFeatures, SegmentMap};
use occseg::inference::{detect, detect_multi};
use occseg::learning::{joint_train_multi, train, TrainConfig, TrainingSample};
use occseg::model::{Model, ViewpointShape};
use occseg::{Error, Features, Image, RunConfig, TrainedModel};

#[derive(Parser, Debug)]
#[command(name = "occseg", version, about = "Occlusion-aware object detection and segmentation")]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory all outputs are written to.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic occlusion dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Run detection on images.
    Detect(DetectArgs),
    /// Score detections against a dataset.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    max_occlusion: f64,
    #[arg(long, default_value_t = 1)]
    occluders: usize,
    #[arg(long, default_value_t = 12)]
    clutter: usize,
    #[arg(long, default_value_t = 1)]
    texture_seed: u64,
    /// Distinct objects per image.
    #[arg(long, default_value_t = 1)]
    objects: usize,
    /// Make every later object overlap the first.
    #[arg(long)]
    overlap: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "model.bin")]
    model_name: String,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Dataset images used for training, as `start..end`.
    #[arg(long, value_parser = parse_range)]
    range: Option<Range<usize>>,
    /// Object id to train; ignored with `--joint`.
    #[arg(long, default_value_t = 0)]
    object: usize,
    /// Train all objects together, writing one model per object.
    #[arg(long)]
    joint: bool,
    /// Hold the clique weights at zero.
    #[arg(long)]
    freeze_hop: bool,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Model file; repeat with `--multi` for several objects.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    /// Images to process; ids are their positions in this list.
    #[arg(long)]
    image: Vec<PathBuf>,
    /// Dataset whose images to process; ids are dataset indices.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_range)]
    range: Option<Range<usize>>,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Sequential multi-object detection with response transfer.
    #[arg(long)]
    multi: bool,
    #[arg(long)]
    no_overlays: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Mode {
    Det,
    Seg,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Det)]
    mode: Mode,
    /// Score segment-refined masks instead of raw cell masks.
    #[arg(long)]
    refined: bool,
    #[arg(long, value_parser = parse_range)]
    range: Option<Range<usize>>,
    /// Model whose viewpoint shapes the detections use (defaults to annotated shapes).
    #[arg(long)]
    model: Vec<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or("expected start..end")?;
    let a = a.parse::<usize>().map_err(|e| e.to_string())?;
    let b = b.parse::<usize>().map_err(|e| e.to_string())?;
    if a >= b {
        return Err("empty range".into());
    }
    Ok(a..b)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&cli, &config, a),
        Command::Train(a) => cmd_train(&cli, &config, a),
        Command::Detect(a) => cmd_detect(&cli, &config, a),
        Command::Eval(a) => cmd_eval(&cli, &config, a),
    }
}

fn cmd_synth(cli: &Cli, config: &RunConfig, a: &SynthArgs) -> Result<ExitCode> {
    if !(0.0..=0.9).contains(&a.max_occlusion) {
        bail!("--max-occlusion {} outside [0, 0.9]", a.max_occlusion);
    }
    let synth = SynthConfig {
        n_images: a.n,
        seed: cli.seed,
        object_texture_seed: a.texture_seed,
        n_objects: a.objects,
        occluder_count: a.occluders,
        max_occlusion: a.max_occlusion,
        clutter_level: a.clutter,
        cell_size: config.cell_size,
        scale_step: config.scale_step,
        force_overlap: a.overlap,
        ..SynthConfig::default()
    };
    let images = gen_synthetic(&synth)?;
    write_dataset(&cli.out_dir, &images, synth.shape)?;
    info!("wrote {} images to {}", images.len(), cli.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn features_for(image: &Image, config: &RunConfig) -> Result<(Features, SegmentMap)> {
    let seg = segment_unsupervised(image, config.seg_k, config.seg_min_size)?;
    Ok((ImageFeatures::compute(image, &seg, &config.pyramid())?, seg))
}

fn dataset_range(anns: &[Annotation], range: &Option<Range<usize>>) -> Range<usize> {
    let n = anns.iter().map(|a| a.image + 1).max().unwrap_or(0);
    match range {
        Some(r) => r.start..r.end.min(n),
        None => 0..n,
    }
}

fn output_file(out_dir: &Path, name: &str) -> Result<PathBuf> {
    if name.is_empty() || Path::new(name).components().count() != 1 || name.contains("..") {
        bail!("output name {name:?} must be a plain file name");
    }
    Ok(out_dir.join(name))
}

fn cmd_train(cli: &Cli, config: &RunConfig, a: &TrainArgs) -> Result<ExitCode> {
    let anns = read_annotations(&a.dataset)?;
    let range = dataset_range(&anns, &a.range);
    let mut objects: BTreeMap<usize, (ViewpointShape, Vec<TrainingSample<f64>>)> = BTreeMap::new();
    let mut cache: BTreeMap<usize, Features> = BTreeMap::new();
    for ann in anns.iter().filter(|x| range.contains(&x.image)) {
        if !a.joint && ann.object != a.object {
            continue;
        }
        if !cache.contains_key(&ann.image) {
            let img: Image = load_image(image_path(&a.dataset, ann.image))?;
            cache.insert(ann.image, features_for(&img, config)?.0);
        }
        let shape = ann.shape()?;
        let entry = objects.entry(ann.object).or_insert_with(|| (shape, Vec::new()));
        if entry.0 != shape || ann.viewpoint != 0 {
            bail!("object {} uses several box shapes; only one viewpoint per object is supported here", ann.object);
        }
        entry.1.push(TrainingSample {
            features: cache[&ann.image].clone(),
            y_gt: ann.label(),
        });
    }
    if objects.is_empty() {
        bail!("no training annotations selected");
    }
    let train_config = TrainConfig {
        c_reg: config.c_reg,
        k: config.k,
        epsilon: config.epsilon,
        max_iters: a.max_iters.unwrap_or(config.max_iters),
        freeze_hop: config.freeze_hop || a.freeze_hop,
        ..TrainConfig::new(vec![objects.values().next().unwrap().0])
    };
    let (models, state) = if a.joint {
        let shapes: Vec<Vec<ViewpointShape>> = objects.values().map(|o| vec![o.0]).collect();
        let data: Vec<Vec<TrainingSample<f64>>> = objects.into_values().map(|o| o.1).collect();
        joint_train_multi(&data, &shapes, &train_config)?
    } else {
        let samples = objects.into_values().next().unwrap().1;
        let state = train(&samples, &train_config)?;
        (vec![state.weights()], state)
    };
    for (k, w) in models.into_iter().enumerate() {
        let name = if a.joint {
            let stem = a.model_name.strip_suffix(".bin").unwrap_or(&a.model_name);
            format!("{stem}_{k}.bin")
        } else {
            a.model_name.clone()
        };
        let path = output_file(&cli.out_dir, &name)?;
        Model::new(w, config.cell_size).save(&path)?;
        info!("wrote {}", path.display());
    }
    state.write_log(fs::File::create(cli.out_dir.join("train_log.csv"))?)?;
    if state.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("training stopped at the iteration cap without converging");
        Ok(ExitCode::from(2))
    }
}

fn cmd_detect(cli: &Cli, config: &RunConfig, a: &DetectArgs) -> Result<ExitCode> {
    let models = a
        .model
        .iter()
        .map(|p| TrainedModel::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    if let Some(m) = models.iter().find(|m| m.cell_size != config.cell_size) {
        return Err(Error::Argument(format!(
            "model cell size {} differs from configured cell size {}",
            m.cell_size, config.cell_size
        ))
        .into());
    }
    if models.len() > 1 && !a.multi {
        bail!("several models need --multi");
    }
    let mut inputs: Vec<(usize, PathBuf)> = a.image.iter().cloned().enumerate().collect();
    if let Some(root) = &a.dataset {
        let anns = read_annotations(root)?;
        inputs.extend(dataset_range(&anns, &a.range).map(|i| (i, image_path(root, i))));
    }
    if inputs.is_empty() {
        bail!("no images given (use --image or --dataset)");
    }
    let mut records = Vec::new();
    let overlays = cli.out_dir.join("overlays");
    if a.top_n > 0 && !a.no_overlays {
        fs::create_dir_all(&overlays)?;
    }
    if a.multi {
        fs::create_dir_all(cli.out_dir.join("owners"))?;
    }
    for (id, path) in &inputs {
        if a.top_n == 0 {
            break;
        }
        let img: Image = load_image(path).with_context(|| format!("loading {}", path.display()))?;
        let (features, _) = features_for(&img, config)?;
        let geometry = features.pyramid.geometry();
        let mut found: Vec<(usize, occseg::inference::Detection<f64>, ViewpointShape)> = Vec::new();
        if a.multi {
            let multi = detect_multi(&features, &models)?;
            for (o, d) in multi.detections.into_iter().enumerate() {
                let shape = models[o].layout().shape(d.label.viewpoint);
                found.push((o, d, shape));
            }
            let seg = SegmentMap {
                width: multi.width,
                height: multi.height,
                pixel_labels: multi.owner.clone(),
                segment_areas: Vec::new(),
            };
            seg.write_pgm16(cli.out_dir.join("owners").join(format!("{id:03}.pgm")))?;
        } else {
            let m = &models[0];
            for d in detect(&features, &m.weights, a.top_n, config.nms_iou)? {
                let shape = m.layout().shape(d.label.viewpoint);
                found.push((0, d, shape));
            }
        }
        let masks: Vec<PixelMask> = found.iter().map(|(_, d, s)| rasterize_cells(&d.label, *s, &geometry)).collect();
        for (o, d, _) in &found {
            records.push(DetectionRecord::from_detection(*id, *o, d));
        }
        if !a.no_overlays {
            let items: Vec<OverlayItem> = found
                .iter()
                .zip(&masks)
                .map(|((o, d, _), m)| OverlayItem {
                    rect: d.rect,
                    mask: m,
                    caption: format!("obj {o} score {:.3}", d.score),
                })
                .collect();
            let href = fs::canonicalize(path).unwrap_or(path.clone());
            let svg = overlay_svg(&href.to_string_lossy(), img.width(), img.height(), &items);
            fs::write(overlays.join(format!("{id:03}.svg")), svg)?;
        }
    }
    write_detections(fs::File::create(cli.out_dir.join("detections.txt"))?, &records)?;
    info!("wrote {} detections", records.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(cli: &Cli, config: &RunConfig, a: &EvalArgs) -> Result<ExitCode> {
    let anns = read_annotations(&a.dataset)?;
    let dets = read_detections(&a.detections)?;
    let range = dataset_range(&anns, &a.range);
    let n_images = range.len();
    if let Some(d) = dets.iter().find(|d| !range.contains(&d.image)) {
        return Err(Error::Reference(format!("detection refers to image {} outside the dataset range", d.image)).into());
    }
    let models = a.model.iter().map(TrainedModel::load).collect::<std::result::Result<Vec<_>, _>>()?;
    let shape_of = |object: usize, viewpoint: usize| -> Result<ViewpointShape> {
        if let Some(m) = models.get(object).or_else(|| if models.len() == 1 { models.first() } else { None }) {
            m.layout().check_viewpoint(viewpoint)?;
            return Ok(m.layout().shape(viewpoint));
        }
        anns.iter()
            .find(|x| x.object == object && x.viewpoint == viewpoint)
            .ok_or_else(|| anyhow!("no shape known for object {object} viewpoint {viewpoint}"))?
            .shape()
            .map_err(Into::into)
    };
    let object_ids: Vec<usize> = {
        let mut v: Vec<usize> = anns.iter().map(|x| x.object).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if let Some(d) = dets.iter().find(|d| !object_ids.contains(&d.object)) {
        return Err(Error::Reference(format!("detection refers to unknown object {}", d.object)).into());
    }
    let mut out = String::new();
    match a.mode {
        Mode::Det => {
            out.push_str("object,fppi,recall\n");
            let mut summary = String::new();
            for &o in &object_ids {
                let mut per_det: Vec<Vec<ScoredBox>> = vec![Vec::new(); n_images];
                let mut per_gt = vec![Vec::new(); n_images];
                for x in anns.iter().filter(|x| x.object == o && range.contains(&x.image)) {
                    per_gt[x.image - range.start].push(x.rect());
                }
                for d in dets.iter().filter(|d| d.object == o) {
                    // Box rectangles are unclipped, so the image extent does not matter here.
                    let g = occseg::PyramidGeometry::from_step(
                        0,
                        0,
                        config.cell_size,
                        config.scale_step,
                        d.label.pos.level + 1,
                    );
                    let s = shape_of(o, d.label.viewpoint)?;
                    per_det[d.image - range.start].push(ScoredBox {
                        score: d.score,
                        rect: d.label.pixel_rect(&g, s),
                    });
                }
                let curve = fppi_recall(&per_det, &per_gt, 0.5)?;
                for (f, r) in &curve.points {
                    out.push_str(&format!("{o},{f},{r}\n"));
                }
                summary.push_str(&format!("{o},{},{}\n", curve.auc, curve.recall_at(1.0)));
                println!("object {o}: AUC {:.4}, recall at 1 FPPI {:.4}", curve.auc, curve.recall_at(1.0));
            }
            fs::write(cli.out_dir.join("metrics_det.csv"), out)?;
            fs::write(cli.out_dir.join("metrics_det_summary.csv"), format!("object,auc,recall_at_1fppi\n{summary}"))?;
        }
        Mode::Seg => {
            out.push_str("image,object,error,vacuous\n");
            let mut total = 0.0;
            let mut count = 0usize;
            for x in anns.iter().filter(|x| range.contains(&x.image)) {
                let gt = read_mask(&mask_path(&a.dataset, x.image), x.object)?;
                let best = dets
                    .iter()
                    .filter(|d| d.image == x.image && d.object == x.object)
                    .max_by(|p, q| p.score.partial_cmp(&q.score).unwrap());
                let mut pred = match best {
                    Some(d) => {
                        let g = occseg::PyramidGeometry::from_step(
                            gt.width,
                            gt.height,
                            config.cell_size,
                            config.scale_step,
                            d.label.pos.level + 1,
                        );
                        rasterize_cells(&d.label, shape_of(x.object, d.label.viewpoint)?, &g)
                    }
                    None => PixelMask::empty(gt.width, gt.height),
                };
                if a.refined {
                    let img: Image = load_image(image_path(&a.dataset, x.image))?;
                    let seg = segment_unsupervised(&img, config.seg_k, config.seg_min_size)?;
                    pred = refine_mask(&pred, &seg, 0.8)?;
                }
                let e = voc_seg_error(&pred, &gt)?;
                out.push_str(&format!("{},{},{},{}\n", x.image, x.object, e.error, e.vacuous));
                total += e.error;
                count += 1;
            }
            let mean = if count > 0 { total / count as f64 } else { 0.0 };
            out.push_str(&format!("mean,,{mean},\n"));
            println!("mean segmentation error {mean:.4} over {count} objects");
            fs::write(cli.out_dir.join("metrics_seg.csv"), out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
