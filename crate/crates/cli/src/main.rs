//! `whatif` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! Failures print one JSON object on standard error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use whatif_core::action::Action;
use whatif_core::codec;
use whatif_core::datagen;
use whatif_core::io;
use whatif_core::parser::{self, Backend, TrainConfig};
use whatif_core::physics::Simulator;
use whatif_core::pipeline::{self, AblationConfig};
use whatif_core::scene::{validate_scene, Scene};

#[derive(Parser)]
#[command(
    name = "whatif",
    version,
    about = "Physics-backed what-if answering for table-top scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Rules,
    Linear,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Rules => Backend::Rules,
            BackendArg::Linear => Backend::Linear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    Sweep,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenDataset {
        #[arg(long, default_value_t = 15)]
        batches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the parser heads and fit the effects model on the train split.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train on every example, for datasets too small to split.
        #[arg(long)]
        train_all: bool,
    },
    /// Parse an action description and print the action.
    Parse {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rules")]
        backend: BackendArg,
        /// Scene the sentence refers to; needed for "the middle of the table".
        #[arg(long)]
        scene: Option<PathBuf>,
        text: String,
    },
    /// Simulate an action file on a scene file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        action: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a what-if question about a scene.
    Answer {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value = "rules")]
        backend: BackendArg,
        /// Also write the full answer, with 300 Hz trajectories, here.
        #[arg(long)]
        out: Option<PathBuf>,
        text: String,
    },
    /// Score the pipeline against ground-truth descriptions.
    Evaluate {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "sweep")]
        ablation: Ablation,
        #[arg(long, value_enum, default_value = "linear")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Keep created scenes as files in this directory.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<whatif_core::Error> for Failure {
    fn from(e: whatif_core::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<pipeline::StageError> for Failure {
    fn from(e: pipeline::StageError) -> Self {
        let msg = e.to_string();
        if e.error.is_data_error() {
            Failure::Data(msg)
        } else {
            Failure::Internal(msg)
        }
    }
}

type Outcome = Result<(), Failure>;

fn print<T: Serialize>(value: &T) {
    println!("{}", codec::encode_pretty(value));
}

fn gen_dataset(batches: usize, seed: u64, out: PathBuf) -> Outcome {
    if batches == 0 {
        return Err(Failure::Usage("--batches must be at least 1".into()));
    }
    let examples = datagen::gen_dataset(batches, seed)?;
    let m = io::write_dataset(&out, seed, batches, &examples)?;
    print(&json!({
        "out": out,
        "master_seed": m.master_seed,
        "batches": m.batches,
        "n_examples": m.n_examples,
        "n_descriptions": m.n_descriptions,
        "n_test": m.n_test,
        "per_kind": m.per_kind,
        "interaction_rate": m.interaction_rate,
    }));
    Ok(())
}

fn fit(data: PathBuf, out: PathBuf, seed: u64, train_all: bool) -> Outcome {
    let (_, examples) = io::read_dataset(&data)?;
    let train = if train_all {
        examples
    } else {
        datagen::split(&examples)?.0
    };
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let (models, report) = pipeline::fit(&Simulator::default(), &train, &cfg)?;
    io::write_models(&out, &models)?;
    print(&report);
    Ok(())
}

fn parse(models: Option<PathBuf>, backend: Backend, scene: Option<PathBuf>, text: &str) -> Outcome {
    let model = match (backend, models) {
        (Backend::Linear, None) => {
            return Err(Failure::Usage("the linear backend needs --models".into()))
        }
        (Backend::Linear, Some(dir)) => io::read_models(dir)?.parser,
        (Backend::Rules, _) => None,
    };
    let scene: Option<Scene> = scene.map(codec::read_file).transpose()?;
    let outcome = parser::parse(text, backend, model.as_ref(), scene.as_ref())?;
    print(&outcome.action);
    Ok(())
}

fn read_scene(path: PathBuf) -> Result<Scene, Failure> {
    let scene: Scene = codec::read_file(&path)?;
    if let Some(v) = validate_scene(&scene).first() {
        return Err(Failure::Data(format!("{}: {v}", path.display())));
    }
    Ok(scene)
}

fn simulate(scene: PathBuf, action: PathBuf, seed: u64, out: PathBuf) -> Outcome {
    let scene = read_scene(scene)?;
    let action: Action = codec::read_file(&action)?;
    let result = whatif_core::physics::simulate(&scene, &action, seed)?;
    codec::write_file(&out, &result)?;
    print(&json!({ "out": out, "contacts": result.contacts.len() }));
    Ok(())
}

fn answer(
    models: PathBuf,
    scene: PathBuf,
    backend: Backend,
    out: Option<PathBuf>,
    text: &str,
) -> Outcome {
    let models = io::read_models(models)?;
    let scene = read_scene(scene)?;
    let ans = pipeline::answer_whatif(&Simulator::default(), &scene, text, &models, backend)?;
    if let Some(out) = out {
        codec::write_file(out, &ans)?;
    }
    let descriptions: Vec<_> = ans
        .descriptions
        .values()
        .map(|d| json!({ "subject": d.subject, "text": d.text }))
        .collect();
    print(&json!({
        "action": ans.action(),
        "descriptions": descriptions,
        "events": ans.events(),
    }));
    Ok(())
}

fn evaluate(
    models: PathBuf,
    data: PathBuf,
    ablation: Ablation,
    backend: Backend,
    split: SplitArg,
    out: PathBuf,
) -> Outcome {
    let models = io::read_models(models)?;
    let (_, examples) = io::read_dataset(&data)?;
    let examples = match split {
        SplitArg::Test => datagen::split(&examples)?.1,
        SplitArg::All => examples,
    };
    let configs = match ablation {
        Ablation::Sweep => pipeline::sweep_configs(),
        Ablation::None => vec![("All Predictions", AblationConfig::NONE)],
    };
    let sim = Simulator::default();
    let rows = pipeline::run_sweep(&sim, &examples, &configs, &models, backend)?;
    let components = pipeline::component_eval(&examples, models.parser.as_ref())?;
    codec::write_file(
        &out,
        &json!({
            "backend": backend,
            "n_examples": examples.len(),
            "rows": rows,
            "components": components,
        }),
    )?;
    print!("{}", pipeline::format_sweep(&rows));
    for c in &components {
        println!(
            "{:?}: action type {:.3}, acted object {:.3}, push direction {:.3}, rotation {:.3}, drop onto {:.3}",
            c.backend, c.action_type, c.acted_object, c.push_direction, c.rotation_sense, c.drop_onto
        );
    }
    Ok(())
}

fn serve(models: PathBuf, addr: String, store: Option<PathBuf>) -> Outcome {
    let models = io::read_models(models)?;
    let state = match store {
        Some(dir) => whatif_service::AppState::persistent(models, dir)?,
        None => whatif_service::AppState::new(models),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::Data(format!("cannot bind {addr}: {e}")))?;
        eprintln!(
            "listening on {}",
            listener
                .local_addr()
                .map_or(addr.clone(), |a| a.to_string())
        );
        whatif_service::serve(listener, Arc::new(state))
            .await
            .map_err(|e| Failure::Internal(e.to_string()))
    })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenDataset { batches, seed, out } => gen_dataset(batches, seed, out),
        Command::Fit {
            data,
            out,
            seed,
            train_all,
        } => fit(data, out, seed, train_all),
        Command::Parse {
            models,
            backend,
            scene,
            text,
        } => parse(models, backend.into(), scene, &text),
        Command::Simulate {
            scene,
            action,
            seed,
            out,
        } => simulate(scene, action, seed, out),
        Command::Answer {
            models,
            scene,
            backend,
            out,
            text,
        } => answer(models, scene, backend.into(), out, &text),
        Command::Evaluate {
            models,
            data,
            ablation,
            backend,
            split,
            out,
        } => evaluate(models, data, ablation, backend.into(), split, out),
        Command::Serve {
            models,
            addr,
            store,
        } => serve(models, addr, store),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::Usage(e.render().to_string());
            eprintln!("{}", json!({ "error": f.kind(), "message": f.message() }));
            return ExitCode::from(f.code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind(), "message": f.message() }));
            ExitCode::from(f.code())
        }
    }
}
