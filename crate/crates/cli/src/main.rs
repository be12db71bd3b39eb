use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use argchat::commands::{self, AnalyzeArgs, Report, SimulateArgs};
use argchat::config::Settings;
use argchat::server::{router, AppState};
use argchat_core::corpus::{RankBy, DEFAULT_THRESHOLD};
use argchat_core::dialogue::Variant;
use argchat_core::store::SessionStore;
use argchat_core::Policy;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "argchat", version, about = "Concern-aware persuasion chatbot")]
struct Cli {
    /// TOML settings file; ARGCHAT_* variables override it.
    #[arg(long, global = true, env = "ARGCHAT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by commands that load knowledge bases.
#[derive(Args)]
struct KbOpts {
    /// Knowledge base file, served under its file stem next to the bundled one.
    #[arg(long)]
    kb: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Chat with the bot in the terminal.
    Chat {
        #[arg(long, value_parser = commands::parse_variant, default_value = "I")]
        variant: Variant,
        #[arg(long, value_parser = commands::parse_policy, default_value = "strategic")]
        policy: Policy,
        #[arg(long)]
        kb_id: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        kb: KbOpts,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        /// Directory for session logs; sessions are kept in memory when unset.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        kb: KbOpts,
    },
    /// Run synthetic persuadees against the chatbot arms.
    Simulate {
        /// `all` or a comma-separated list such as `I-strategic,II-baseline`.
        #[arg(long, default_value = "all")]
        arms: String,
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Persuadee population parameters (JSON).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory receiving one session log per session.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        kb: KbOpts,
    },
    /// Cluster raw arguments by word overlap.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stem words before comparing.
        #[arg(long)]
        stem: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tally votes and keep the top counterarguments per group.
    Rank {
        /// Candidates and vote sheets.
        #[arg(long)]
        votes: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_enum, default_value = "meat-eater")]
        rank_by: RankByArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label free-text explanations with the concern they mention.
    LabelConcerns {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summaries and significance tests.
    Analyze(AnalyzeCmd),
    /// Re-run session logs through the engine and check they match.
    Replay {
        /// Log files or directories of logs.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[command(flatten)]
        kb: KbOpts,
    },
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct AnalyzeCmd {
    #[command(subcommand)]
    sub: Option<AnalyzeSub>,
    /// Session log files or directories.
    #[arg(long, num_args = 1..)]
    sessions: Vec<PathBuf>,
    /// Comma-separated subset of variant, policy, concern.
    #[arg(long, default_value = "variant,policy")]
    group_by: String,
    #[arg(long, value_enum, num_args = 1.., default_values_t = [Report::Summary])]
    report: Vec<Report>,
    /// Machine-readable report records.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    kb: KbOpts,
}

#[derive(Subcommand)]
enum AnalyzeSub {
    /// Pearson chi-square test of a contingency table.
    Chi2 {
        /// Rows separated by `;`, cells by `,`, e.g. "5,22;17,9".
        #[arg(long)]
        table: String,
        #[arg(long)]
        yates: bool,
        #[arg(long)]
        json: bool,
    },
    /// Change and significance reports from per-arm counts.
    Counts {
        /// Counts file; defaults to the bundled published counts.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RankByArg {
    MeatEater,
    Vegetarian,
    Combined,
}

impl From<RankByArg> for RankBy {
    fn from(r: RankByArg) -> Self {
        match r {
            RankByArg::MeatEater => RankBy::MeatEater,
            RankByArg::Vegetarian => RankBy::Vegetarian,
            RankByArg::Combined => RankBy::Combined,
        }
    }
}

fn settings(cli_config: Option<&PathBuf>, kb: &KbOpts) -> Result<Settings> {
    let mut s = Settings::load(cli_config.map(PathBuf::as_path))?;
    if let Some(path) = &kb.kb {
        s.kb = Some(path.clone());
    }
    Ok(s)
}

fn open_store(s: &Settings) -> Result<(SessionStore, String)> {
    let (engines, default_kb) = s.engines()?;
    let store = match &s.data_dir {
        Some(dir) => SessionStore::open(dir, engines, s.session_defaults())
            .with_context(|| format!("opening session store in {}", dir.display()))?,
        None => SessionStore::in_memory(engines, s.session_defaults()),
    };
    Ok((store, default_kb))
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

fn serve(s: Settings) -> Result<()> {
    let (store, default_kb) = open_store(&s)?;
    let restored = store.index().len();
    let state = Arc::new(AppState { store, default_kb });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&s.listen)
            .await
            .with_context(|| format!("binding {}", s.listen))?;
        let addr = listener.local_addr()?;
        tracing::info!(%addr, restored, "serving");
        println!("listening on {addr}");
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, router(state)).with_graceful_shutdown(shutdown_signal()).await?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_ref();
    match cli.command {
        Command::Chat { variant, policy, kb_id, data_dir, kb } => {
            let mut s = settings(config, &kb)?;
            if data_dir.is_some() {
                s.data_dir = data_dir;
            }
            let (store, default_kb) = open_store(&s)?;
            let kb_id = kb_id.unwrap_or(default_kb);
            let stdin = std::io::stdin();
            commands::chat(&store, &kb_id, variant, policy, stdin.lock(), std::io::stdout().lock())?;
            Ok(())
        }
        Command::Serve { listen, data_dir, kb } => {
            let mut s = settings(config, &kb)?;
            if let Some(l) = listen {
                s.listen = l;
            }
            if data_dir.is_some() {
                s.data_dir = data_dir;
            }
            serve(s)
        }
        Command::Simulate { arms, n, model, seed, out, kb } => {
            let s = settings(config, &kb)?;
            let (kb_id, engine) = s.engine()?;
            let args = SimulateArgs {
                arms: &arms,
                n,
                model: model.as_deref(),
                seed: seed.unwrap_or(s.seed),
                out: out.as_deref(),
            };
            commands::simulate_cmd(&kb_id, &engine, args)
        }
        Command::Cluster { input, threshold, seed, stem, out } => {
            commands::cluster_cmd(&input, threshold, seed, stem, out.as_deref())
        }
        Command::Rank { votes, k, rank_by, out } => commands::rank_cmd(&votes, k, rank_by.into(), out.as_deref()),
        Command::LabelConcerns { input, out } => commands::label_cmd(&input, out.as_deref()),
        Command::Analyze(a) => match a.sub {
            Some(AnalyzeSub::Chi2 { table, yates, json }) => commands::chi2_cmd(&table, yates, json),
            Some(AnalyzeSub::Counts { input, out }) => commands::analyze_counts_cmd(input.as_deref(), out.as_deref()),
            None => {
                let s = settings(config, &a.kb)?;
                let (engines, _) = s.engines()?;
                let args = AnalyzeArgs {
                    sessions: &a.sessions,
                    group_by: &a.group_by,
                    reports: &a.report,
                    out: a.out.as_deref(),
                };
                commands::analyze_sessions_cmd(&engines, args)
            }
        },
        Command::Replay { logs, kb } => {
            let s = settings(config, &kb)?;
            let (engines, _) = s.engines()?;
            commands::replay_cmd(&logs, &engines)
        }
    }
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ARGCHAT_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
