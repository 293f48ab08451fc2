use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qads::config::{LoadedConfig, RatioScheme};
use qads::embfile::{load_embeddings, save_embeddings};
use qads::jsonl::{load_corpus, load_quality, load_scores, write_jsonl, write_quality};
use qads::mixture::{write_json, Strategy};
use qads::pipeline::{
    finish_artifact, input_digests, is_fresh, key_of, resolve_plan, run_mix, run_quality, RunContext, EMBEDDINGS_FILE,
    PLAN_FILE, QUALITY_FILE,
};
use qads::report::{summary_json, summary_table, validate_scorer, validation_text, ScoreRange};
use qads::scoring::embed_corpus;
use qads::{Error, Result};
use qads_core::analysis::dataset_report;
use qads_core::corpus::Corpus;
use qads_core::geometry::{kcenter_greedy, random_seed_pool, seed_pool_size};
use qads_core::provider::LanguageModel;
use qads_core::selection::{qads_select, quality_vector, random_select, round_budget};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "qads",
    version,
    about = "Quality-aware diverse selection of instruction data"
)]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Inputs {
    /// Dataset as NAME=PATH (repeatable). Defaults to the config datasets.
    #[arg(long = "input", value_parser = parse_input)]
    inputs: Vec<(String, PathBuf)>,
}

#[derive(Subcommand)]
enum Command {
    /// Embed datasets into an embedding file.
    Embed {
        #[command(flatten)]
        inputs: Inputs,
        /// Embed questions only.
        #[arg(long)]
        question_only: bool,
    },
    /// Score prompt samples against k-center test sets.
    Qscore {
        #[command(flatten)]
        inputs: Inputs,
        /// Test dataset (repeatable).
        #[arg(long = "test")]
        tests: Vec<String>,
        /// Prompt dataset (repeatable).
        #[arg(long = "prompt")]
        prompts: Vec<String>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
        /// Existing embedding file covering the test datasets.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// K-center greedy over an embedding file.
    Kcenter {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Random seed pool size; defaults to min(100, n - budget).
        #[arg(long)]
        seed_pool: Option<usize>,
    },
    /// Select from one dataset.
    Select {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = "qads", value_parser = parse_strategy)]
        strategy: Strategy,
        #[arg(long, conflicts_with = "ratio")]
        budget: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        quality: Option<PathBuf>,
    },
    /// Compute the per-dataset selection plan.
    Ratios {
        /// Quality table, required for quality ratios.
        #[arg(long)]
        quality: Option<PathBuf>,
    },
    /// Run the full pipeline from the config.
    Mix,
    /// Per-dataset quality summary.
    Report {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        quality: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Correlate scorer predictions with measured quality scores.
    ValidateScorer {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "0,1")]
        real_range: ScoreRange,
        #[arg(long, default_value = "0,1")]
        pred_range: ScoreRange,
    },
}

fn parse_input(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown strategy {s:?}"))
}

/// Shared state for the single-stage commands.
struct Env {
    loaded: LoadedConfig,
    out_dir: PathBuf,
    command: String,
}

impl Env {
    fn new(cli: &Cli, command: &str) -> Result<Self> {
        let mut loaded = match &cli.config {
            Some(p) => LoadedConfig::load(p)?,
            None => LoadedConfig::from_env(),
        };
        if cli.seed.is_some() {
            loaded.config.seed = cli.seed;
        }
        let out_dir = cli
            .out
            .clone()
            .unwrap_or_else(|| loaded.resolve(&loaded.config.output_dir));
        fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
            path: out_dir.clone(),
            source: e,
        })?;
        Ok(Env {
            loaded,
            out_dir,
            command: command.to_string(),
        })
    }

    fn seed(&self) -> Result<u64> {
        self.loaded.config.seed()
    }

    fn inputs(&self, given: &Inputs) -> Result<Vec<(String, PathBuf)>> {
        let inputs = if given.inputs.is_empty() {
            self.loaded.dataset_inputs()
        } else {
            given.inputs.clone()
        };
        if inputs.is_empty() {
            return Err(Error::Config(vec![
                "no datasets: pass --input NAME=PATH or set datasets in the config".into(),
            ]));
        }
        Ok(inputs)
    }

    fn corpus(&self, given: &Inputs) -> Result<(Vec<(String, PathBuf)>, Corpus)> {
        let inputs = self.inputs(given)?;
        let corpus = load_corpus(&inputs)?;
        Ok((inputs, corpus))
    }

    fn provider(&self) -> Result<qads::provider::AnyProvider> {
        self.loaded.config.provider.build()
    }

    fn finish(&self, artifact: &Path, stage_key: &str, provider: &str) -> Result<()> {
        finish_artifact(
            artifact,
            &self.command,
            &self.loaded.config.hash(),
            stage_key,
            self.loaded.config.seed,
            provider,
        )
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Embed { inputs, question_only } => {
            let env = Env::new(cli, "embed")?;
            let model = env.provider()?;
            let (inputs, corpus) = env.corpus(inputs)?;
            let question_only = *question_only || env.loaded.config.embedding.question_only;
            let names: Vec<String> = corpus.names().map(str::to_string).collect();
            let key = key_of(&(
                "embed",
                model.identity(),
                question_only,
                input_digests(&inputs, &names)?,
            ));
            let path = env.out_dir.join(EMBEDDINGS_FILE);
            if !is_fresh(&path, &key) {
                let p = env.loaded.config.provider.parallelism;
                let emb = embed_corpus(&corpus, None, &model, p, question_only)?;
                save_embeddings(&emb, &path)?;
                env.finish(&path, &key, &model.identity())?;
            }
            println!("{}", path.display());
        }
        Command::Qscore {
            inputs,
            tests,
            prompts,
            n1,
            n2,
            embeddings,
        } => {
            let env = Env::new(cli, "qscore")?;
            let seed = env.seed()?;
            let model = env.provider()?;
            let (inputs, corpus) = env.corpus(inputs)?;
            let mut config = env.loaded.config.clone();
            if !tests.is_empty() {
                config.quality.test_datasets = tests.clone();
            }
            if !prompts.is_empty() {
                config.quality.prompt_datasets = Some(prompts.clone());
            } else if config.quality.prompt_datasets.is_none() && config.datasets.is_empty() {
                config.quality.prompt_datasets = Some(corpus.names().map(str::to_string).collect());
            }
            config.quality.n1 = n1.unwrap_or(config.quality.n1);
            config.quality.n2 = n2.unwrap_or(config.quality.n2);
            if config.quality.test_datasets.is_empty() {
                return Err(Error::Config(vec![
                    "quality.test_datasets must not be empty (or pass --test)".into(),
                ]));
            }
            let emb = match embeddings {
                Some(p) => load_embeddings(p)?,
                None => embed_corpus(
                    &corpus,
                    Some(&config.quality.test_datasets),
                    &model,
                    config.provider.parallelism,
                    config.embedding.question_only,
                )?,
            };
            let table = run_quality(&corpus, &emb, &config, seed, &model)?;
            let path = env.out_dir.join(QUALITY_FILE);
            write_quality(&table, &path)?;
            let names: Vec<String> = corpus.names().map(str::to_string).collect();
            let key = key_of(&(
                "qscore",
                model.identity(),
                seed,
                &config.quality,
                input_digests(&inputs, &names)?,
            ));
            env.finish(&path, &key, &model.identity())?;
            println!("{}", path.display());
        }
        Command::Kcenter {
            embeddings,
            budget,
            seed_pool,
        } => {
            let env = Env::new(cli, "kcenter")?;
            let seed = env.seed()?;
            let emb = load_embeddings(embeddings)?.for_metric(env.loaded.config.embedding.metric);
            let n = emb.len();
            let pool = random_seed_pool(n, seed_pool.unwrap_or_else(|| seed_pool_size(n, *budget)), seed);
            let picks = kcenter_greedy(&emb, &pool, *budget, seed)?;
            let ids: Vec<&str> = picks.iter().map(|&i| emb.ids()[i].as_str()).collect();
            let seed_ids: Vec<&str> = pool.iter().map(|&i| emb.ids()[i].as_str()).collect();
            let path = env.out_dir.join("kcenter.json");
            write_json(&json!({"seed_pool": seed_ids, "picked": ids}), &path)?;
            env.finish(&path, &key_of(&("kcenter", budget, &pool)), "none")?;
            println!("{}", path.display());
        }
        Command::Select {
            inputs,
            strategy,
            budget,
            ratio,
            embeddings,
            quality,
        } => {
            let env = Env::new(cli, "select")?;
            let seed = env.seed()?;
            let (_, corpus) = env.corpus(inputs)?;
            let names: Vec<&str> = corpus.names().collect();
            let [name] = names.as_slice() else {
                return Err(Error::Config(vec![format!(
                    "select takes exactly one dataset, got {}",
                    names.len()
                )]));
            };
            let data = corpus.dataset(name).expect("listed dataset");
            let n = data.len();
            let budget = match (budget, ratio) {
                (Some(b), _) => *b,
                (None, Some(r)) if *r > 0.0 && *r <= 1.0 => round_budget(r * n as f64),
                (None, Some(r)) => return Err(Error::Config(vec![format!("--ratio {r} outside (0, 1]")])),
                (None, None) => return Err(Error::Config(vec!["pass --budget or --ratio".into()])),
            };
            let picks = match strategy {
                Strategy::KeepAll => (0..n).collect(),
                Strategy::Random => random_select(n, budget, seed)?,
                Strategy::KCenter | Strategy::Qads => {
                    let emb_path = embeddings
                        .as_ref()
                        .ok_or_else(|| Error::Config(vec!["--embeddings is required for this strategy".into()]))?;
                    let emb = load_embeddings(emb_path)?
                        .subset(data.iter().map(|s| s.id.as_str()))?
                        .for_metric(env.loaded.config.embedding.metric);
                    let pool = random_seed_pool(n, seed_pool_size(n, budget), seed);
                    if *strategy == Strategy::KCenter {
                        kcenter_greedy(&emb, &pool, budget, seed)?
                    } else {
                        let q_path = quality
                            .as_ref()
                            .ok_or_else(|| Error::Config(vec!["--quality is required for qads".into()]))?;
                        let (q, _) = quality_vector(&emb, &load_quality(q_path)?);
                        qads_select(&emb, &q, &pool, budget, seed)?
                    }
                }
            };
            let path = env.out_dir.join("selection.jsonl");
            write_jsonl(picks.iter().map(|&i| &data[i]), &path)?;
            env.finish(&path, &key_of(&("select", strategy, budget, &picks)), "none")?;
            println!("{}", path.display());
        }
        Command::Ratios { quality } => {
            let env = Env::new(cli, "ratios")?;
            let config = &env.loaded.config;
            let corpus = load_corpus(&env.inputs(&Inputs::default())?)?;
            let table = match (quality, &config.ratios) {
                (Some(p), _) => Some(load_quality(p)?),
                (None, RatioScheme::Quality { .. }) => {
                    return Err(Error::Config(vec!["--quality is required for quality ratios".into()]))
                }
                _ => None,
            };
            let plan = resolve_plan(config, &corpus, table.as_ref())?;
            let path = env.out_dir.join(PLAN_FILE);
            write_json(&plan, &path)?;
            env.finish(&path, &key_of(&("plan", &plan)), "none")?;
            for e in &plan.entries {
                println!("{}\t{}\t{:.6}\t{}", e.dataset, e.n, e.ratio, e.budget);
            }
        }
        Command::Mix => {
            let loaded = match &cli.config {
                Some(p) => LoadedConfig::load(p)?,
                None => return Err(Error::Config(vec!["mix requires --config".into()])),
            };
            let ctx = RunContext::new(loaded, cli.seed, cli.out.clone(), "mix")?;
            let outcome = run_mix(&ctx)?;
            println!(
                "{} samples from {} datasets -> {}",
                outcome.manifest.total,
                outcome.manifest.entries.len(),
                outcome.out_dir.display()
            );
        }
        Command::Report { inputs, quality, json } => {
            let env = Env::new(cli, "report")?;
            let (_, corpus) = env.corpus(inputs)?;
            let rows = dataset_report(&load_quality(quality)?, &corpus);
            let (text, js) = (summary_table(&rows), summary_json(&rows));
            for (file, body) in [("report.txt", &text), ("report.json", &js)] {
                let path = env.out_dir.join(file);
                fs::write(&path, body).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                env.finish(&path, &key_of(&("report", file)), "none")?;
            }
            print!("{}", if *json { js } else { text });
        }
        Command::ValidateScorer {
            real,
            pred,
            real_range,
            pred_range,
        } => {
            let env = Env::new(cli, "validate-scorer")?;
            let real: BTreeMap<String, f64> = load_scores(real)?;
            let pred = load_scores(pred)?;
            let v = validate_scorer(&real, &pred, *real_range, *pred_range)?;
            let path = env.out_dir.join("validation.json");
            write_json(&v, &path)?;
            env.finish(&path, &key_of(&("validate-scorer", real_range, pred_range)), "none")?;
            print!("{}", validation_text(&v));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = match &e {
                Error::Config(problems) => json!(problems),
                other => json!(other.to_string()),
            };
            eprintln!("{}", json!({"error": e.kind(), "message": message}));
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
