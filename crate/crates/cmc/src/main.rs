use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmc::cmc_core::costmodel::{best_effort, cost_from_probability};
use cmc::cmc_core::features::compute_features;
use cmc::cmc_core::hierarchy::{build_merge_tree, extract_candidates, seeded_watershed};
use cmc::cmc_core::solver::{extract_segmentation, Status};
use cmc::cmc_core::{Crag, Mode};
use cmc::error::{Error, Result, Stage, StageExt};
use cmc::format::{load_json, save_json, CostsJson, CragJson, FeaturesJson, SolutionJson};
use cmc::pipeline::{self, Example, ImagePaths, LoadedImage, Model};
use cmc::synth::{generate_synthetic_with, SynthParams};
use cmc::{pgm, PipelineConfig};

#[derive(Parser)]
#[command(name = "cmc", version, about = "Candidate multi-cut segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// `--config` plus per-field overrides.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON file with pipeline parameters
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed_threshold: Option<f64>,
    #[arg(long)]
    max_merges: Option<u32>,
    #[arg(long)]
    score_threshold: Option<f64>,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Seed for all randomness
    #[arg(long = "seed")]
    rng_seed: Option<u64>,
    /// full, mt (merge-tree only) or mc (leaf multi-cut only)
    #[arg(long)]
    mode: Option<Mode>,
    /// Exclude ground-truth background from VOI and Rand
    #[arg(long, conflicts_with = "keep_background")]
    ignore_background: bool,
    /// Evaluate background pixels too
    #[arg(long)]
    keep_background: bool,
    /// Solver time limit in seconds
    #[arg(long)]
    time_limit: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed_threshold {
            c.seed_threshold = v;
        }
        if let Some(v) = self.max_merges {
            c.max_merges = v;
        }
        if self.score_threshold.is_some() {
            c.score_threshold = self.score_threshold;
        }
        if let Some(v) = self.n_trees {
            c.n_trees = v;
        }
        if let Some(v) = self.rng_seed {
            c.rng_seed = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if self.ignore_background {
            c.ignore_background = true;
        }
        if self.keep_background {
            c.ignore_background = false;
        }
        if let Some(v) = self.time_limit {
            c.time_limit = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Superpixels, merge-tree and candidate graph from a boundary map
    BuildCrag {
        #[arg(long)]
        boundary: PathBuf,
        /// Use these superpixels instead of the seeded watershed
        #[arg(long)]
        superpixels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the superpixels used
        #[arg(long)]
        superpixels_out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Node and edge feature vectors
    Features {
        #[arg(long)]
        crag: PathBuf,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        boundary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train node and edge classifiers; repeat --crag/--features/--gt per image
    Train {
        #[arg(long, required = true)]
        crag: Vec<PathBuf>,
        #[arg(long, required = true)]
        features: Vec<PathBuf>,
        #[arg(long, required = true)]
        gt: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Predict selection and merge costs
    Costs {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve; exits with 2 when the time limit cut the search short
    Solve {
        #[arg(long)]
        crag: PathBuf,
        #[arg(long)]
        costs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the segmentation
        #[arg(long)]
        seg: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare a segmentation with ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Defaults to stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// The feasible solution closest to ground truth
    BestEffort {
        #[arg(long)]
        crag: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seg: Option<PathBuf>,
        /// Score the solution with these costs
        #[arg(long)]
        costs: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate synthetic raw, boundary and ground-truth images
    Synth {
        #[arg(long, default_value_t = 10)]
        n_images: usize,
        #[arg(long, default_value_t = 8)]
        n_cells: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// False boundaries drawn through every cell
        #[arg(long, default_value_t = 0)]
        internal_cuts: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run every stage on one image, or train on one directory and test on another
    Pipeline {
        #[arg(long, requires = "raw", conflicts_with_all = ["train_dir", "test_dir"])]
        boundary: Option<PathBuf>,
        #[arg(long, requires = "boundary")]
        raw: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory of <stem>_{raw,boundary,gt}.pgm training images
        #[arg(long, requires = "test_dir")]
        train_dir: Option<PathBuf>,
        #[arg(long)]
        test_dir: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn load_crag(path: &Path) -> Result<Crag> {
    let json: CragJson = load_json(path, Stage::Input)?;
    json.to_crag().map_err(|message| Error::Format {
        stage: Stage::Input,
        path: path.into(),
        message,
    })
}

fn format_err(path: &Path) -> impl Fn(String) -> Error + '_ {
    move |message| Error::Format {
        stage: Stage::Input,
        path: path.into(),
        message,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::BuildCrag {
            boundary,
            superpixels,
            out,
            superpixels_out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let b = pgm::read_raster(&boundary, Stage::Input)?;
            let sp = match superpixels {
                Some(path) => pgm::read_labels(&path, Stage::Input)?,
                None => seeded_watershed(&b, config.seed_threshold).stage(Stage::Superpixels)?,
            };
            let tree = build_merge_tree(&sp, &b).stage(Stage::MergeTree)?;
            let crag = extract_candidates(&tree, config.max_merges, config.score_threshold)
                .stage(Stage::Candidates)?;
            save_json(&out, &CragJson::from_crag(&crag))?;
            if let Some(path) = superpixels_out {
                pgm::write_labels(&path, &sp)?;
            }
            eprintln!(
                "{} candidates, {} edges",
                crag.num_candidates(),
                crag.num_edges()
            );
        }
        Command::Features {
            crag,
            raw,
            boundary,
            out,
        } => {
            let crag = load_crag(&crag)?;
            let raw = pgm::read_raster(&raw, Stage::Input)?;
            let b = pgm::read_raster(&boundary, Stage::Input)?;
            let fs = compute_features(&crag, &raw, &b).stage(Stage::Features)?;
            save_json(&out, &FeaturesJson::from_features(&crag, &fs))?;
        }
        Command::Train {
            crag,
            features,
            gt,
            out,
            cfg,
        } => {
            let config = cfg.resolve()?;
            if crag.len() != features.len() || crag.len() != gt.len() {
                return Err(Error::invalid(
                    Stage::Input,
                    "--crag, --features and --gt must be given equally often",
                ));
            }
            let mut loaded = Vec::new();
            for ((c, f), g) in crag.iter().zip(&features).zip(&gt) {
                let crag = load_crag(c)?;
                let fj: FeaturesJson = load_json(f, Stage::Input)?;
                let fs = fj.to_features(&crag).map_err(format_err(f))?;
                loaded.push((crag, fs, pgm::read_labels(g, Stage::Input)?));
            }
            let examples: Vec<Example<'_>> = loaded
                .iter()
                .map(|(crag, features, gt)| Example { crag, features, gt })
                .collect();
            pipeline::train(&config, &examples)?.save(&out)?;
        }
        Command::Costs {
            model,
            features,
            out,
        } => {
            let model = Model::load(&model)?;
            let fj: FeaturesJson = load_json(&features, Stage::Input)?;
            if fj.schema.node != model.node_schema || fj.schema.edge != model.edge_schema {
                return Err(Error::invalid(
                    Stage::Costs,
                    "model was trained on a different feature schema",
                ));
            }
            let predict = |forest: &cmc::cmc_core::forest::Forest,
                           rows: &BTreeMap<String, Vec<f64>>| {
                rows.iter()
                    .map(|(k, x)| {
                        if x.len() != forest.n_features {
                            return Err(Error::invalid(
                                Stage::Costs,
                                format!("{k}: wrong feature count"),
                            ));
                        }
                        Ok((k.clone(), cost_from_probability(forest.predict_proba(x))))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()
            };
            let costs = CostsJson {
                f: predict(&model.node, &fj.nodes)?,
                g: predict(&model.edge, &fj.edges)?,
            };
            save_json(&out, &costs)?;
        }
        Command::Solve {
            crag,
            costs,
            out,
            seg,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let crag = load_crag(&crag)?;
            let cj: CostsJson = load_json(&costs, Stage::Input)?;
            let table = cj.to_costs(&crag).map_err(format_err(&costs))?;
            let outcome = pipeline::solve_timed(&config, &crag, &table)?;
            save_json(&out, &SolutionJson::from_solution(&crag, &outcome.solution))?;
            if let Some(path) = seg {
                let img =
                    extract_segmentation(&crag, &outcome.solution).stage(Stage::Segmentation)?;
                pgm::write_labels(&path, &img)?;
            }
            eprintln!(
                "{:?}: objective {} after {} rounds, {} path constraints, {} nodes",
                outcome.status,
                outcome.solution.objective,
                outcome.rounds,
                outcome.constraints_added,
                outcome.nodes_explored
            );
            if outcome.status == Status::TimeLimit {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { pred, gt, out, cfg } => {
            let config = cfg.resolve()?;
            let p = pgm::read_labels(&pred, Stage::Input)?;
            let g = pgm::read_labels(&gt, Stage::Input)?;
            let metrics = pipeline::evaluate(&p, &g, config.ignore_background)?;
            match out {
                Some(path) => save_json(&path, &metrics)?,
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&metrics).expect("metrics serialize")
                ),
            }
        }
        Command::BestEffort {
            crag,
            gt,
            out,
            seg,
            costs,
            cfg,
        } => {
            let config = cfg.resolve()?;
            let crag = load_crag(&crag)?;
            let g = pgm::read_labels(&gt, Stage::Input)?;
            let mut best = best_effort(&crag, &g, config.mode).stage(Stage::Solve)?;
            if let Some(path) = costs {
                let cj: CostsJson = load_json(&path, Stage::Input)?;
                let table = cj.to_costs(&crag).map_err(format_err(&path))?;
                best.solution.objective = table.objective(&best.solution.y, &best.solution.m);
            }
            save_json(&out, &SolutionJson::from_solution(&crag, &best.solution))?;
            if let Some(path) = seg {
                let img = extract_segmentation(&crag, &best.solution).stage(Stage::Segmentation)?;
                pgm::write_labels(&path, &img)?;
            }
        }
        Command::Synth {
            n_images,
            n_cells,
            noise,
            seed,
            internal_cuts,
            out_dir,
        } => {
            let mut params = SynthParams::new(n_cells, noise);
            params.internal_cuts = internal_cuts;
            let images =
                generate_synthetic_with(&params, n_images, seed).stage(Stage::Synthesis)?;
            pipeline::save_synthetic(&out_dir, &images)?;
        }
        Command::Pipeline {
            boundary,
            raw,
            gt,
            model,
            train_dir,
            test_dir,
            out_dir,
            cfg,
        } => {
            let config = cfg.resolve()?;
            if let (Some(b), Some(r)) = (boundary, raw) {
                let b = pgm::read_raster(&b, Stage::Input)?;
                let r = pgm::read_raster(&r, Stage::Input)?;
                let gt = gt.map(|p| pgm::read_labels(&p, Stage::Input)).transpose()?;
                let model = model.map(|p| Model::load(&p)).transpose()?;
                let output = pipeline::run_pipeline(&config, &b, &r, gt.as_ref(), model.as_ref())?;
                output.save(&out_dir)?;
                if let Some(m) = output.metrics {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&m).expect("metrics serialize")
                    );
                }
                if output.inference.outcome.status == Status::TimeLimit {
                    return Ok(ExitCode::from(2));
                }
            } else if let (Some(train_dir), Some(test_dir)) = (train_dir, test_dir) {
                let load = |dir: &Path| -> Result<Vec<LoadedImage>> {
                    ImagePaths::scan(dir)?
                        .iter()
                        .map(LoadedImage::load)
                        .collect()
                };
                let (_, report) = pipeline::run_batch(
                    &config,
                    &load(&train_dir)?,
                    &load(&test_dir)?,
                    Some(&out_dir),
                )?;
                if let Some(m) = report.mean {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&m).expect("metrics serialize")
                    );
                }
            } else {
                return Err(Error::invalid(
                    Stage::Input,
                    "give --boundary and --raw, or --train-dir and --test-dir",
                ));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
