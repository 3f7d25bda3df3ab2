use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde_json::Value;

use sozgraph::connstats::StoredGraph;
use sozgraph::harness::{
    self, assemble_node_features, job_seeds, split_nodes, ExperimentConfig, Sweep,
};
use sozgraph::hfgcn::{self, ClassWeights, FusionMode, PatientGraph, Weighting};
use sozgraph::metrics::compute_metrics;
use sozgraph::nn::argmax_rows;
use sozgraph::synth::{plan_cohort, save_plans, CohortReader, CohortSpec};
use sozgraph::{io, satae, Error, Result};

/// Seizure-onset-zone classification pipeline on synthetic sEEG cohorts.
#[derive(Parser)]
#[command(name = "sozgraph", version)]
struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-patient jobs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Experiment config (JSON); every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort directory.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Band-power features for every patient.
    Preprocess {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        feat_len: Option<usize>,
    },
    /// Train the shared autoencoder on a feature store.
    TrainSae {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a feature store into latents.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-patient CCEP connectivity graphs.
    BuildGraph {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        rho_tau: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Keep correlations below the threshold instead of |ρ| above it.
        #[arg(long)]
        eq8_literal: bool,
        /// Comma-separated CCEP segment indices forming the graph.
        #[arg(long, value_delimiter = ',')]
        ccep_subset: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one graph network per patient on a single split.
    TrainHfgcn {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full experiment: features, graphs, autoencoder, repeats and sweeps.
    Run {
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long)]
        runs_dir: Option<PathBuf>,
        /// Cache directory for features, graphs and latents.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        /// `F=1-10`, `K=1,3,5`, `fusion=full,static_only`, `bands=delta,theta+alpha`,
        /// `states=wake,sleep+seizure` or `placement=E,D,ED,none`.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, value_delimiter = ',')]
        ccep_subset: Option<Vec<usize>>,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Compare finished runs; prints CSV.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also list the logistic baseline rows.
        #[arg(long)]
        include_baseline: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Graph network overrides shared by `train-hfgcn` and `run`.
#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    fusion_mode: Option<FusionMode>,
    /// `cascade` or `raw-layer`.
    #[arg(long, value_parser = enum_arg::<Weighting>)]
    weighting: Option<Weighting>,
    /// `auto` for inverse class-frequency weights.
    #[arg(long, value_parser = class_weights_arg)]
    class_weights: Option<ClassWeights>,
    #[arg(long)]
    clamp_negative_edges: bool,
    #[arg(long)]
    cheb_order: Option<usize>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl ModelFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let h = &mut cfg.hfgcn;
        if let Some(m) = self.fusion_mode {
            h.fusion_mode = m;
        }
        if let Some(w) = self.weighting {
            h.weighting = w;
        }
        if let Some(w) = self.class_weights {
            h.class_weights = Some(w);
        }
        h.clamp_negative_edges |= self.clamp_negative_edges;
        if let Some(f) = self.cheb_order {
            h.cheb_order = f;
        }
        if let Some(k) = self.knn {
            h.knn = k;
        }
        if let Some(e) = self.epochs {
            h.epochs = e;
        }
    }
}

fn enum_arg<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|e| e.to_string())
}

fn class_weights_arg(s: &str) -> std::result::Result<ClassWeights, String> {
    if s == "auto" {
        return Ok(ClassWeights::Auto);
    }
    let parts: Vec<f64> = s.split(',').map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| {
        format!("expected `auto` or two comma-separated weights, got {s:?}")
    })?;
    match parts[..] {
        [a, b] => Ok(ClassWeights::Fixed([a, b])),
        _ => Err(format!("expected two weights, got {}", parts.len())),
    }
}

fn parse_values(values: &str, numeric: bool) -> Vec<Value> {
    values
        .split(',')
        .flat_map(|v| {
            if numeric {
                if let Some((Ok(a), Ok(b))) = v.split_once('-').map(|(a, b)| (a.parse::<u64>(), b.parse::<u64>())) {
                    return (a..=b).map(Value::from).collect();
                }
                if let Ok(n) = v.parse::<u64>() {
                    return vec![Value::from(n)];
                }
            }
            vec![Value::String(v.into())]
        })
        .collect()
}

fn parse_sweep(s: &str) -> Result<Sweep> {
    let (param, values) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("sweep {s:?} must look like PARAM=VALUES")))?;
    let values: Vec<Value> = match param {
        "F" | "K" => parse_values(values, true),
        "bands" | "states" => parse_values(values, false)
            .into_iter()
            .map(|v| Value::Array(v.as_str().unwrap_or("").split('+').map(|x| Value::String(x.into())).collect()))
            .collect(),
        _ => parse_values(values, false),
    };
    serde_json::from_value(serde_json::json!({ "param": param, "values": values }))
        .map_err(|e| Error::config(format!("bad sweep {s:?}: {e}")))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(path) => io::read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn synth(cli: &Cli, spec: Option<&Path>, out: &Path) -> Result<()> {
    let mut spec: CohortSpec = match spec {
        Some(p) => io::read_json(p)?,
        None => CohortSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let plans = plan_cohort(&spec)?;
    info!("writing {} patients to {}", plans.len(), out.display());
    save_plans(out, &spec, &plans)
}

fn preprocess(cfg: &mut ExperimentConfig, cohort: &Path, out: &Path, feat_len: Option<usize>) -> Result<()> {
    if let Some(l) = feat_len {
        cfg.preprocess.feat_len = l;
    }
    let reader = CohortReader::open(cohort)?;
    let pool = harness::worker_pool(cfg.workers)?;
    let tensors = harness::preprocess_cohort(&reader, &cfg.preprocess, &pool)?;
    harness::save_store(out, &tensors, &harness::feature_settings(&reader, &cfg.preprocess))?;
    println!("{} patients -> {}", tensors.len(), out.display());
    Ok(())
}

fn train_sae(cfg: &ExperimentConfig, features: &Path, out: &Path) -> Result<()> {
    let tensors = harness::load_features(features, "preprocess")?;
    let (model, history) = satae::train_shared(&tensors, &cfg.satae, cfg.seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::create_dir(parent)?;
    }
    satae::save_model(&model, out)?;
    let last = history.epoch_loss.last().copied().unwrap_or(f64::NAN);
    println!("final reconstruction loss {last:.6}; model -> {}", out.display());
    Ok(())
}

fn encode(model: &Path, features: &Path, out: &Path) -> Result<()> {
    if !sozgraph::nn::manifest_path(model).exists() {
        return Err(Error::Dependency {
            stage: "train-sae",
            path: model.to_path_buf(),
        });
    }
    let model = satae::load_model(model)?;
    let tensors = harness::load_features(features, "preprocess")?;
    let latents = harness::encode_latents(&model, &tensors)?;
    io::create_dir(out)?;
    for t in &latents {
        t.save(out)?;
    }
    println!("{} latent tensors -> {}", latents.len(), out.display());
    Ok(())
}

fn build_graph(cfg: &mut ExperimentConfig, features: &Path, cohort: &Path, out: &Path) -> Result<()> {
    // the CCEP chain uses the same filters the features were made with
    let settings = harness::stored_settings(features).ok_or_else(|| Error::Dependency {
        stage: "preprocess",
        path: features.join("settings.json"),
    })?;
    if let Some(pp) = settings.get("preprocess") {
        cfg.preprocess = serde_json::from_value(pp.clone())
            .map_err(|e| Error::config(format!("bad preprocess settings in {}: {e}", features.display())))?;
    }
    let reader = CohortReader::open(cohort)?;
    let pool = harness::worker_pool(cfg.workers)?;
    let subset = cfg.ccep_subset.as_deref();
    let graphs = harness::build_graphs(&reader, &cfg.graph, &cfg.preprocess, subset, &pool)?;
    for g in &graphs {
        g.save(out)?;
        println!("patient {}: density {:.4}", g.sidecar.patient, g.adjacency.density());
    }
    harness::write_settings(out, &harness::graph_settings(&reader, &cfg.preprocess, &cfg.graph, subset))
}

fn train_hfgcn(cfg: &ExperimentConfig, graph_dir: &Path, latent_dir: &Path, out: &Path) -> Result<()> {
    cfg.validate()?;
    let latents = harness::load_features(latent_dir, "encode")?;
    io::create_dir(out)?;
    println!("patient,acc,recall,precision,f1,best_epoch");
    for t in &latents {
        let graph = StoredGraph::load(graph_dir, t.patient)?;
        let x = assemble_node_features(t, &cfg.bands, &cfg.states)?;
        let (split_seed, model_seed) = job_seeds(cfg.seed, 0, t.patient);
        let g = PatientGraph {
            patient: t.patient,
            x,
            adjacency: graph.adjacency,
            labels: t.labels.clone(),
            masks: split_nodes(&t.labels, cfg.split_fractions, split_seed)?,
        };
        let (model, history) = hfgcn::train_hfgcn(&g, &cfg.hfgcn, model_seed)?;
        let pred: Vec<u8> = argmax_rows(&hfgcn::predict(&g, &model)?).into_iter().map(|c| c as u8).collect();
        let m = compute_metrics(&pred, &g.labels, &g.masks.test);
        let stem = format!("patient_{:03}", t.patient);
        hfgcn::save_model(&model, &out.join(format!("{stem}.ckpt")))?;
        io::write_text(&out.join(format!("{stem}.history.csv")), &history.to_csv())?;
        println!("{},{},{},{},{},{}", t.patient, m.acc, m.recall, m.precision, m.f1, history.best_epoch);
    }
    io::write_json(&out.join("config.json"), cfg)
}

fn report(runs: &[PathBuf], include_baseline: bool, csv: Option<&Path>, json: Option<&Path>) -> Result<bool> {
    let rows = harness::report(runs, include_baseline);
    let text = harness::report_csv(&rows);
    print!("{text}");
    if let Some(p) = csv {
        io::write_text(p, &text)?;
    }
    if let Some(p) = json {
        io::write_json(p, &rows)?;
    }
    Ok(rows.iter().all(|r| !r.is_error()))
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { spec, out } => synth(cli, spec.as_deref(), out)?,
        Command::Preprocess { cohort, out, feat_len } => preprocess(&mut cfg, cohort, out, *feat_len)?,
        Command::TrainSae { features, out } => train_sae(&cfg, features, out)?,
        Command::Encode { model, features, out } => encode(model, features, out)?,
        Command::BuildGraph {
            features,
            cohort,
            rho_tau,
            alpha,
            eq8_literal,
            ccep_subset,
            out,
        } => {
            if let Some(r) = rho_tau {
                cfg.graph.rho_tau = *r;
            }
            if let Some(a) = alpha {
                cfg.graph.alpha = *a;
            }
            cfg.graph.eq8_literal |= eq8_literal;
            if ccep_subset.is_some() {
                cfg.ccep_subset = ccep_subset.clone();
            }
            build_graph(&mut cfg, features, cohort, out)?
        }
        Command::TrainHfgcn {
            graph,
            latents,
            model,
            out,
        } => {
            model.apply(&mut cfg);
            train_hfgcn(&cfg, graph, latents, out)?
        }
        Command::Run {
            cohort,
            runs_dir,
            artifacts,
            repeats,
            sweep,
            ccep_subset,
            model,
        } => {
            if let Some(c) = cohort {
                cfg.cohort = c.clone();
            }
            if let Some(r) = runs_dir {
                cfg.runs_dir = r.clone();
            }
            if artifacts.is_some() {
                cfg.artifacts = artifacts.clone();
            }
            if let Some(r) = repeats {
                cfg.repeats = *r;
            }
            if let Some(s) = sweep {
                cfg.sweep = Some(parse_sweep(s)?);
            }
            if ccep_subset.is_some() {
                cfg.ccep_subset = ccep_subset.clone();
            }
            model.apply(&mut cfg);
            let outcome = harness::run_experiment(&cfg)?;
            print!("{}", std::fs::read_to_string(outcome.dir.join("metrics.csv")).unwrap_or_default());
            println!("run directory: {}", outcome.dir.display());
        }
        Command::Report {
            runs,
            include_baseline,
            csv,
            json,
        } => {
            if !report(runs, *include_baseline, csv.as_deref(), json.as_deref())? {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
