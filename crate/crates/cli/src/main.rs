use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use concept_bench::pipeline::Sizes;
use concept_bench::{Error, ErrorClass};
use concept_bench_cli::config::{
    AdapterSpec, EditorChoice, LlmSettings, RemoteSettings, RendererChoice, RunConfig,
};
use concept_bench_cli::stages;

#[derive(Parser)]
#[command(name = "concept-bench", version, about = "Interventional text benchmarks and explanation faithfulness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run directory shared by all stages.
    #[arg(long, default_value = "run")]
    dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Cache directory for remote responses and generated texts [default: <dir>/cache].
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Environment variable holding the service token.
    #[arg(long)]
    token_env: Option<String>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, render and write a dataset with interventional pairs.
    Generate {
        #[arg(long)]
        dataset: String,
        /// model_train,model_test,method_train,interventional
        #[arg(long)]
        sizes: Sizes,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Concept changes per interventional example.
        #[arg(long, default_value_t = 3)]
        changes: usize,
        #[arg(long, default_value = "deterministic")]
        renderer: RendererChoice,
        /// Directory with <dataset>/personas and <dataset>/templates.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the explained model and concept predictor on every text.
    Predict {
        /// oracle[:kappa], file:<path> or remote:<url>
        #[arg(long)]
        model: AdapterSpec,
        /// gold, file:<path> or remote:<url>
        #[arg(long, default_value = "gold")]
        concepts: AdapterSpec,
        #[command(flatten)]
        common: Common,
    },
    /// Explain every interventional pair with one method.
    Explain {
        /// ft_match, pt_match, st_match, random_match, approx, convecs, cfgen[:strategy]
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// markers, file:<path> or remote:<url>
        #[arg(long, default_value = "markers")]
        embedder: AdapterSpec,
        #[arg(long)]
        strategy: Option<String>,
        /// structural or llm
        #[arg(long, default_value = "structural")]
        editor: EditorChoice,
        /// Model scoring edited texts (cfgen only).
        #[arg(long)]
        model: Option<AdapterSpec>,
        /// Keep the target concept's block in ConVecs similarity.
        #[arg(long)]
        include_target: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score explanations against reference effects and write the report.
    Evaluate {
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo effect of each concept on the outcome.
    TrueEffects {
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// individual or population
        #[arg(long, default_value = "individual")]
        definition: String,
        #[command(flatten)]
        common: Common,
    },
}

fn base(command: &str, c: &Common) -> RunConfig {
    let mut cfg = RunConfig::new(command, &c.dir);
    cfg.jobs = c.jobs;
    if let Some(cache) = &c.cache {
        cfg.cache = cache.clone();
    }
    cfg.remote = RemoteSettings {
        token_env: c.token_env.clone(),
        timeout_secs: c.timeout_secs,
        batch_size: c.batch_size,
    };
    if let (Some(url), Some(model)) = (&c.llm_url, &c.llm_model) {
        cfg.llm = Some(LlmSettings {
            base_url: url.clone(),
            model: model.clone(),
            temperature: c.temperature,
        });
    }
    cfg
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Upstream => 3,
        ErrorClass::Remote => 4,
        ErrorClass::Integrity => 5,
    }
}

fn run(cli: Cli) -> concept_bench::Result<()> {
    match cli.command {
        Command::Generate {
            dataset,
            sizes,
            seed,
            changes,
            renderer,
            assets,
            common,
        } => {
            let mut cfg = base("generate", &common);
            cfg.dataset = Some(dataset);
            cfg.sizes = Some(sizes);
            cfg.seed = seed;
            cfg.changes_per_example = changes;
            cfg.renderer = renderer;
            cfg.assets = assets;
            let out = stages::cmd_generate(&cfg)?;
            println!("{}", out.display());
        }
        Command::Predict {
            model,
            concepts,
            common,
        } => {
            let mut cfg = base("predict", &common);
            cfg.model = Some(model);
            cfg.concepts = Some(concepts);
            let out = stages::cmd_predict(&cfg)?;
            println!("{}", out.display());
        }
        Command::Explain {
            method,
            k,
            seed,
            embedder,
            strategy,
            editor,
            model,
            include_target,
            common,
        } => {
            let mut cfg = base("explain", &common);
            cfg.methods = vec![method];
            cfg.k = k;
            cfg.seed = seed;
            cfg.embedder = Some(embedder);
            cfg.strategy = strategy;
            cfg.editor = editor;
            cfg.model = model;
            cfg.include_target = include_target;
            let out = stages::cmd_explain(&cfg)?;
            println!("{}", out.display());
        }
        Command::Evaluate { methods, common } => {
            let mut cfg = base("evaluate", &common);
            cfg.methods = methods;
            let digest = stages::cmd_evaluate(&cfg)?;
            println!("{digest}");
        }
        Command::TrueEffects {
            dataset,
            samples,
            seed,
            definition,
            common,
        } => {
            let mut cfg = base("true-effects", &common);
            cfg.dataset = Some(dataset);
            cfg.samples = samples;
            cfg.seed = seed;
            cfg.definition = definition;
            for row in stages::cmd_true_effects(&cfg)? {
                match row.effect {
                    Some(v) => println!("{}\t{}\t{v:.4}", row.dataset, row.concept),
                    None => println!("{}\t{}\tnot identifiable", row.dataset, row.concept),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
