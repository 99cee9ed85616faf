//! End-to-end processing of boundary and raw images.
//!
//! superpixels -> merge-tree -> CRAG -> features -> model -> costs -> solve
//! -> segmentation -> metrics

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use cmc_core::costmodel::{best_effort, label_instances, predict_costs, CostTable, Samples};
use cmc_core::eval::{detection_score, rand_index, voi};
use cmc_core::features::{compute_features, FeatureSet};
use cmc_core::forest::{train_forest, Forest, ForestError, Tree, TreeNode};
use cmc_core::hierarchy::{build_merge_tree, extract_candidates, seeded_watershed, MergeTree};
use cmc_core::solver::{extract_segmentation, solve_with, SolveOutcome};
use cmc_core::{BoundaryMap, Crag, LabelImage, Raster};

use crate::config::PipelineConfig;
use crate::error::{Error, Result, Stage, StageExt};
use crate::format::{
    load_json, save_json, CostsJson, CragJson, FeaturesJson, ForestJson, MetricsJson, ModelJson,
    SchemaJson, SolutionJson,
};
use crate::pgm;
use crate::synth::SyntheticImage;

/// Node and edge classifiers with the feature schemas they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub node: Forest,
    pub edge: Forest,
    pub node_schema: Vec<String>,
    pub edge_schema: Vec<String>,
}

impl Model {
    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            schema: SchemaJson {
                node: self.node_schema.clone(),
                edge: self.edge_schema.clone(),
            },
            node: ForestJson::from_forest(&self.node),
            edge: ForestJson::from_forest(&self.edge),
        }
    }

    pub fn from_json(json: &ModelJson) -> Result<Self, String> {
        let model = Model {
            node: json.node.to_forest()?,
            edge: json.edge.to_forest()?,
            node_schema: json.schema.node.clone(),
            edge_schema: json.schema.edge.clone(),
        };
        if model.node.n_features != model.node_schema.len()
            || model.edge.n_features != model.edge_schema.len()
        {
            return Err("forest feature counts disagree with the schema".into());
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json: ModelJson = load_json(path, Stage::Input)?;
        Model::from_json(&json).map_err(|message| Error::Format {
            stage: Stage::Input,
            path: path.into(),
            message,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json(path, &self.to_json())
    }
}

/// Everything derived from the images before costs enter.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub superpixels: LabelImage,
    pub tree: MergeTree,
    pub crag: Crag,
    pub features: FeatureSet,
}

/// Superpixels (computed unless given), merge-tree, candidates and features.
pub fn prepare(
    config: &PipelineConfig,
    boundary: &BoundaryMap,
    raw: &Raster,
    superpixels: Option<&LabelImage>,
) -> Result<Prepared> {
    if (boundary.width(), boundary.height()) != (raw.width(), raw.height()) {
        return Err(Error::invalid(
            Stage::Input,
            "raw and boundary images differ in size",
        ));
    }
    let superpixels = match superpixels {
        Some(sp) => sp.clone(),
        None => seeded_watershed(boundary, config.seed_threshold).stage(Stage::Superpixels)?,
    };
    let tree = build_merge_tree(&superpixels, boundary).stage(Stage::MergeTree)?;
    let crag = extract_candidates(&tree, config.max_merges, config.score_threshold)
        .stage(Stage::Candidates)?;
    let features = compute_features(&crag, raw, boundary).stage(Stage::Features)?;
    Ok(Prepared {
        superpixels,
        tree,
        crag,
        features,
    })
}

/// A forest, or a constant predictor when the samples hold a single class.
///
/// The constant is the Laplace-smoothed positive rate, so an all-negative set
/// still yields a probability strictly between 0 and 1.
fn fit(samples: &Samples, n_features: usize, n_trees: usize, seed: u64) -> Result<Forest> {
    match train_forest(&samples.features, &samples.labels, n_trees, seed) {
        Ok(forest) => Ok(forest),
        Err(ForestError::SingleClass | ForestError::NoFeatures)
            if samples.is_empty() || single_class(samples) =>
        {
            let positives = samples.labels.iter().filter(|&&l| l).count();
            let probability = (positives as f64 + 1.0) / (samples.len() as f64 + 2.0);
            Ok(Forest {
                trees: vec![Tree {
                    nodes: vec![TreeNode::Leaf { probability }],
                }],
                n_features,
                seed,
            })
        }
        Err(e) => Err(e).stage(Stage::Training),
    }
}

fn single_class(samples: &Samples) -> bool {
    samples.labels.iter().all(|&l| l == samples.labels[0])
}

/// One training image: its CRAG, features and ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub crag: &'a Crag,
    pub features: &'a FeatureSet,
    pub gt: &'a LabelImage,
}

impl<'a> Example<'a> {
    pub fn new(prepared: &'a Prepared, gt: &'a LabelImage) -> Self {
        Example {
            crag: &prepared.crag,
            features: &prepared.features,
            gt,
        }
    }
}

/// Trains node and edge forests on the best-effort solutions of `examples`.
pub fn train(config: &PipelineConfig, examples: &[Example<'_>]) -> Result<Model> {
    let mut nodes = Samples::default();
    let mut edges = Samples::default();
    let (node_schema, edge_schema) = match examples.first() {
        Some(x) => (
            x.features.node_schema.clone(),
            x.features.edge_schema.clone(),
        ),
        None => return Err(Error::invalid(Stage::Training, "no training images")),
    };
    for x in examples {
        if x.features.node_schema != node_schema || x.features.edge_schema != edge_schema {
            return Err(Error::invalid(
                Stage::Training,
                "training images disagree on the feature schema",
            ));
        }
        let best = best_effort(x.crag, x.gt, config.mode).stage(Stage::Training)?;
        let (n, e) = label_instances(x.crag, &best, x.features).stage(Stage::Training)?;
        nodes.extend(n);
        edges.extend(e);
    }
    let node = fit(&nodes, node_schema.len(), config.n_trees, config.rng_seed)?;
    // disjoint per-tree streams for the second forest
    let edge_seed = config.rng_seed.wrapping_add(config.n_trees as u64);
    let edge = fit(&edges, edge_schema.len(), config.n_trees, edge_seed)?;
    Ok(Model {
        node,
        edge,
        node_schema,
        edge_schema,
    })
}

#[derive(Debug, Clone)]
pub struct Inference {
    pub costs: CostTable,
    pub outcome: SolveOutcome,
    pub segmentation: LabelImage,
}

pub fn costs_for(prepared: &Prepared, model: &Model) -> Result<CostTable> {
    if model.node_schema != prepared.features.node_schema
        || model.edge_schema != prepared.features.edge_schema
    {
        return Err(Error::invalid(
            Stage::Costs,
            "model was trained on a different feature schema",
        ));
    }
    predict_costs(&model.node, &model.edge, &prepared.crag, &prepared.features).stage(Stage::Costs)
}

/// Solves with a wall-clock limit of `time_limit` seconds.
pub fn solve_timed(
    config: &PipelineConfig,
    crag: &Crag,
    costs: &CostTable,
) -> Result<SolveOutcome> {
    let deadline = Instant::now() + Duration::from_secs_f64(config.time_limit);
    solve_with(crag, costs, config.mode, &mut || Instant::now() >= deadline).stage(Stage::Solve)
}

pub fn infer(config: &PipelineConfig, prepared: &Prepared, model: &Model) -> Result<Inference> {
    let costs = costs_for(prepared, model)?;
    let outcome = solve_timed(config, &prepared.crag, &costs)?;
    let segmentation =
        extract_segmentation(&prepared.crag, &outcome.solution).stage(Stage::Segmentation)?;
    Ok(Inference {
        costs,
        outcome,
        segmentation,
    })
}

pub fn evaluate(
    pred: &LabelImage,
    gt: &LabelImage,
    ignore_background: bool,
) -> Result<MetricsJson> {
    let v = voi(pred, gt, ignore_background).stage(Stage::Evaluation)?;
    let r = rand_index(pred, gt, ignore_background).stage(Stage::Evaluation)?;
    let d = detection_score(pred, gt).stage(Stage::Evaluation)?;
    Ok(MetricsJson::new(v, r, d))
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub prepared: Prepared,
    pub model: Model,
    /// Whether `model` was trained in this run.
    pub trained: bool,
    pub inference: Inference,
    pub metrics: Option<MetricsJson>,
}

/// Runs every stage on one image. Without a model the ground truth is
/// required and a model is trained on this image alone.
pub fn run_pipeline(
    config: &PipelineConfig,
    boundary: &BoundaryMap,
    raw: &Raster,
    gt: Option<&LabelImage>,
    model: Option<&Model>,
) -> Result<PipelineOutput> {
    config.validate()?;
    let prepared = prepare(config, boundary, raw, None)?;
    let (model, trained) = match (model, gt) {
        (Some(m), _) => (m.clone(), false),
        (None, Some(gt)) => (train(config, &[Example::new(&prepared, gt)])?, true),
        (None, None) => {
            return Err(Error::invalid(
                Stage::Training,
                "either a model or ground truth is required",
            ))
        }
    };
    let inference = infer(config, &prepared, &model)?;
    let metrics = gt
        .map(|gt| evaluate(&inference.segmentation, gt, config.ignore_background))
        .transpose()?;
    Ok(PipelineOutput {
        prepared,
        model,
        trained,
        inference,
        metrics,
    })
}

impl PipelineOutput {
    /// Writes every intermediate into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let crag = &self.prepared.crag;
        pgm::write_labels(&dir.join("superpixels.pgm"), &self.prepared.superpixels)?;
        save_json(&dir.join("crag.json"), &CragJson::from_crag(crag))?;
        save_json(
            &dir.join("features.json"),
            &FeaturesJson::from_features(crag, &self.prepared.features),
        )?;
        if self.trained {
            self.model.save(&dir.join("model.json"))?;
        }
        save_json(
            &dir.join("costs.json"),
            &CostsJson::from_costs(crag, &self.inference.costs),
        )?;
        save_json(
            &dir.join("solution.json"),
            &SolutionJson::from_solution(crag, &self.inference.outcome.solution),
        )?;
        pgm::write_labels(&dir.join("segmentation.pgm"), &self.inference.segmentation)?;
        if let Some(m) = &self.metrics {
            save_json(&dir.join("metrics.json"), m)?;
        }
        Ok(())
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        stage: Stage::Output,
        path: dir.into(),
        source,
    })
}

/// File names used for one synthetic or batch image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePaths {
    pub stem: String,
    pub raw: PathBuf,
    pub boundary: PathBuf,
    pub gt: PathBuf,
}

impl ImagePaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        ImagePaths {
            stem: stem.to_string(),
            raw: dir.join(format!("{stem}_raw.pgm")),
            boundary: dir.join(format!("{stem}_boundary.pgm")),
            gt: dir.join(format!("{stem}_gt.pgm")),
        }
    }

    /// All `<stem>_boundary.pgm` files in `dir`, sorted by stem.
    pub fn scan(dir: &Path) -> Result<Vec<Self>> {
        let entries = fs::read_dir(dir).map_err(|source| Error::Io {
            stage: Stage::Input,
            path: dir.into(),
            source,
        })?;
        let mut stems = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io {
                stage: Stage::Input,
                path: dir.into(),
                source,
            })?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix("_boundary.pgm") {
                stems.push(stem.to_string());
            }
        }
        stems.sort();
        Ok(stems.iter().map(|s| ImagePaths::new(dir, s)).collect())
    }
}

pub fn save_synthetic(dir: &Path, images: &[SyntheticImage]) -> Result<Vec<ImagePaths>> {
    create_dir(dir)?;
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let paths = ImagePaths::new(dir, &format!("{i:03}"));
            pgm::write_raster(&paths.raw, &img.raw)?;
            pgm::write_raster(&paths.boundary, &img.boundary)?;
            pgm::write_labels(&paths.gt, &img.gt)?;
            Ok(paths)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub status: String,
    pub rounds: usize,
    pub objective: f64,
    pub metrics: Option<MetricsJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<ImageReport>,
    /// Per-image metrics averaged over the images with ground truth.
    pub mean: Option<MetricsJson>,
}

pub fn mean_metrics(all: &[MetricsJson]) -> Option<MetricsJson> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let avg = |f: fn(&MetricsJson) -> f64| all.iter().map(f).sum::<f64>() / n;
    Some(MetricsJson {
        voi_split: avg(|m| m.voi_split),
        voi_merge: avg(|m| m.voi_merge),
        voi: avg(|m| m.voi),
        rand: avg(|m| m.rand),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f_score: avg(|m| m.f_score),
    })
}

/// One image of a batch, loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub stem: String,
    pub raw: Raster,
    pub boundary: BoundaryMap,
    pub gt: Option<LabelImage>,
}

impl LoadedImage {
    pub fn load(paths: &ImagePaths) -> Result<Self> {
        let gt = if paths.gt.exists() {
            Some(pgm::read_labels(&paths.gt, Stage::Input)?)
        } else {
            None
        };
        Ok(LoadedImage {
            stem: paths.stem.clone(),
            raw: pgm::read_raster(&paths.raw, Stage::Input)?,
            boundary: pgm::read_raster(&paths.boundary, Stage::Input)?,
            gt,
        })
    }
}

/// Trains one model on all of `train` (ground truth required) and applies
/// it to every image of `test`. Outputs go to `out_dir/<stem>/` when given.
pub fn run_batch(
    config: &PipelineConfig,
    train_images: &[LoadedImage],
    test_images: &[LoadedImage],
    out_dir: Option<&Path>,
) -> Result<(Model, BatchReport)> {
    config.validate()?;
    let mut prepared = Vec::with_capacity(train_images.len());
    for img in train_images {
        let gt = img.gt.as_ref().ok_or_else(|| {
            Error::invalid(
                Stage::Training,
                format!("{}: training image without ground truth", img.stem),
            )
        })?;
        prepared.push((prepare(config, &img.boundary, &img.raw, None)?, gt));
    }
    let examples: Vec<Example<'_>> = prepared.iter().map(|(p, gt)| Example::new(p, gt)).collect();
    let model = train(config, &examples)?;
    drop(prepared);

    let mut reports = Vec::with_capacity(test_images.len());
    for img in test_images {
        let p = prepare(config, &img.boundary, &img.raw, None)?;
        let inference = infer(config, &p, &model)?;
        let metrics = img
            .gt
            .as_ref()
            .map(|gt| evaluate(&inference.segmentation, gt, config.ignore_background))
            .transpose()?;
        let output = PipelineOutput {
            prepared: p,
            model: model.clone(),
            trained: false,
            inference,
            metrics,
        };
        if let Some(dir) = out_dir {
            output.save(&dir.join(&img.stem))?;
        }
        reports.push(ImageReport {
            image: img.stem.clone(),
            status: format!("{:?}", output.inference.outcome.status),
            rounds: output.inference.outcome.rounds,
            objective: output.inference.outcome.solution.objective,
            metrics,
        });
    }
    let with_gt: Vec<MetricsJson> = reports.iter().filter_map(|r| r.metrics).collect();
    let report = BatchReport {
        mean: mean_metrics(&with_gt),
        images: reports,
    };
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        model.save(&dir.join("model.json"))?;
        save_json(&dir.join("report.json"), &report)?;
    }
    Ok((model, report))
}
