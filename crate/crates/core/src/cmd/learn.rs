use std::path::{Path, PathBuf};

use ndarray::Array2;
use persuade::io::{load_game, read_json, save_policy, write_json, write_text, GameFile};
use persuade::learning::{
    sample_dataset, search_local_ne, train_surrogates, EgConfig, EgOptimizer, PipelineConfig,
    TrainConfig, UtilityDataset,
};
use persuade::neural::ArchKind;
use persuade::{rng, Error, GameInstance, Result, TieRule};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{Context, Outcome};
use crate::LearnArgs;

pub const SUMMARY_FORMAT: &str = "persuade-learn/1";
pub const CACHE_ENV: &str = "PERSUADE_CACHE";

/// Experiment configuration file. Seeds come from `--seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub archs: Vec<ArchKind>,
    pub dataset_size: usize,
    pub train: TrainSection,
    pub eg: EgSection,
    /// Deviations per sender for the local check; default from the game size.
    #[serde(default)]
    pub local_samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub final_learning_rate: Option<f64>,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::eps_adam")]
    pub eps_adam: f64,
    #[serde(default = "defaults::validation_fraction")]
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgSection {
    pub steps: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    #[serde(default = "defaults::optimizer")]
    pub optimizer: EgOptimizer,
}

mod defaults {
    use persuade::learning::{EgOptimizer, TrainConfig};

    pub fn beta1() -> f64 {
        TrainConfig::default().beta1
    }
    pub fn beta2() -> f64 {
        TrainConfig::default().beta2
    }
    pub fn eps_adam() -> f64 {
        TrainConfig::default().eps_adam
    }
    pub fn validation_fraction() -> f64 {
        TrainConfig::default().validation_fraction
    }
    pub fn optimizer() -> EgOptimizer {
        EgOptimizer::Adam
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub states: usize,
    pub signals: usize,
    pub actions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchRun {
    pub arch: ArchKind,
    pub verified: bool,
    pub welfare: f64,
    pub utilities: Vec<f64>,
    pub max_improvement: f64,
    /// Held-out MSE of each sender's surrogate.
    pub validation_mse: Vec<f64>,
    pub policy_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnSummary {
    pub format: String,
    pub game: String,
    pub dims: Dims,
    pub eps: f64,
    pub tie: TieRule,
    pub runs: Vec<ArchRun>,
}

pub fn run(ctx: &Context, args: &LearnArgs) -> Result<Outcome> {
    let (game, stored) = load_game(&args.game)?;
    let tie = ctx.tie_for(&game, stored);
    let config: LearnConfig = read_json(&args.config)?;
    if config.archs.is_empty() {
        return Err(Error::Argument(
            "config field 'archs' must list at least one architecture".into(),
        ));
    }
    let seed = ctx.cli.seed;
    let train = TrainConfig {
        epochs: config.train.epochs,
        batch_size: config.train.batch_size,
        learning_rate: config.train.learning_rate,
        final_learning_rate: config.train.final_learning_rate,
        beta1: config.train.beta1,
        beta2: config.train.beta2,
        eps_adam: config.train.eps_adam,
        validation_fraction: config.train.validation_fraction,
        seed: rng::derive_seed(seed, "train"),
    };
    let eg = EgConfig {
        steps: config.eg.steps,
        learning_rate: config.eg.learning_rate,
        restarts: config.eg.restarts,
        optimizer: config.eg.optimizer,
        seed: rng::derive_seed(seed, "eg"),
    };
    train.validate()?;
    eg.validate()?;
    let out = ctx.out_or("learn-out");
    let base = PipelineConfig {
        arch: ArchKind::Dnl,
        dataset_size: config.dataset_size,
        train,
        eg,
        eps: ctx.cli.eps,
        local_samples: config.local_samples,
        threads: ctx.cli.threads,
    };
    let data = dataset(&game, &tie, &base)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "arch".to_string(),
        "restart".into(),
        "verified".into(),
        "welfare".into(),
    ];
    header.extend((0..game.n_senders()).map(|j| format!("u{j}")));
    csv.write_record(&header).map_err(csv_err)?;
    let mut runs = Vec::new();
    for &arch in &config.archs {
        let cfg = PipelineConfig {
            arch,
            ..base.clone()
        };
        let surrogates = train_surrogates(&game, &data, arch, &cfg.train)?;
        for (j, s) in surrogates.iter().enumerate() {
            write_text(
                &out.join("checkpoints")
                    .join(format!("{arch}-sender{j}.json")),
                &s.network.to_checkpoint()?,
            )?;
        }
        let outcome = search_local_ne(&game, &tie, &cfg, surrogates, None)?;
        for r in &outcome.restarts {
            let mut row = vec![
                arch.to_string(),
                r.restart.to_string(),
                r.verified.to_string(),
                fmt(r.welfare),
            ];
            row.extend(r.utilities.iter().map(|&u| fmt(u)));
            csv.write_record(&row).map_err(csv_err)?;
        }
        let policy_file = format!("best-policy-{arch}.json");
        save_policy(&out.join(&policy_file), &outcome.policy)?;
        println!(
            "{arch}: welfare {:.6} ({}), surrogate MSE {:?}",
            outcome.report.welfare(),
            if outcome.verified {
                "verified"
            } else {
                "unverified"
            },
            outcome
                .surrogates
                .iter()
                .map(|s| s.validation_mse)
                .collect::<Vec<_>>()
        );
        runs.push(ArchRun {
            arch,
            verified: outcome.verified,
            welfare: outcome.report.welfare(),
            utilities: outcome.report.utilities.clone(),
            max_improvement: outcome.report.max_improvement,
            validation_mse: outcome
                .surrogates
                .iter()
                .map(|s| s.validation_mse)
                .collect(),
            policy_file,
        });
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| Error::Internal(e.to_string()))?;
    write_text(
        &out.join("results.csv"),
        &String::from_utf8(bytes).expect("csv is utf-8"),
    )?;
    write_json(
        &out.join("summary.json"),
        &LearnSummary {
            format: SUMMARY_FORMAT.into(),
            game: args.game.display().to_string(),
            dims: Dims {
                n: game.n_senders(),
                states: game.states(),
                signals: game.signals(),
                actions: game.actions(),
            },
            eps: ctx.cli.eps,
            tie: tie.clone(),
            runs,
        },
    )?;
    ctx.manifest(
        &out.join("manifest.json"),
        &[&args.game, &args.config],
        json!({ "config": config, "pipeline": base, "tie": tie }),
    )?;
    Ok(Outcome::Success)
}

fn fmt(v: f64) -> String {
    format!("{v:.12}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(e.to_string())
}

#[derive(Serialize, Deserialize)]
struct CachedDataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<Vec<f64>>,
    seed: u64,
}

/// Samples the shared dataset, reusing a cached copy under `PERSUADE_CACHE`.
fn dataset(game: &GameInstance, tie: &TieRule, cfg: &PipelineConfig) -> Result<UtilityDataset> {
    let seed = cfg.dataset_seed();
    let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
        return sample_dataset(game, cfg.dataset_size, tie, seed);
    };
    let key = serde_json::to_string(&json!({
        "game": GameFile::new(game, None),
        "tie": tie,
        "count": cfg.dataset_size,
        "seed": seed,
    }))
    .map_err(|e| Error::Internal(e.to_string()))?;
    let digest = hex::encode(Sha256::digest(key.as_bytes()));
    let path = dir.join(format!("dataset-{}.json", &digest[..16]));
    if path.exists() {
        if let Ok(c) = read_json::<CachedDataset>(&path) {
            return from_cached(c);
        }
    }
    let data = sample_dataset(game, cfg.dataset_size, tie, seed)?;
    store(&path, &data)?;
    Ok(data)
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Internal(format!("corrupt cached dataset: {e}")))
}

fn from_cached(c: CachedDataset) -> Result<UtilityDataset> {
    Ok(UtilityDataset {
        inputs: from_rows(c.inputs)?,
        labels: from_rows(c.labels)?,
        seed: c.seed,
    })
}

fn store(path: &Path, data: &UtilityDataset) -> Result<()> {
    write_json(
        path,
        &CachedDataset {
            inputs: to_rows(&data.inputs),
            labels: to_rows(&data.labels),
            seed: data.seed,
        },
    )
}
