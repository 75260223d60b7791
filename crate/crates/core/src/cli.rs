//! Command-line front end.
//!
//! Settings precedence: command-line flags, then the config file (or the
//! zoo default config for `--system`), then built-in defaults.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::Context;
use crate::report::{
    analyze_documents, check_documents, condensation_dot, csv_document, digraph_dot, entropy_rows,
    write_documents, Document, Stamp, ENTROPY_HEADER,
};
use crate::zoo;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "chainscope",
    version,
    about = "Chain components, shadowing and entropy on finite models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "system")]
    config: Option<PathBuf>,
    /// Use the default configuration of a built-in system.
    #[arg(long, value_name = "NAME")]
    system: Option<String>,
    /// Output directory (overrides `run.out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 = all cores (overrides `run.jobs`).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Seed for sampled checks (overrides `run.seed`).
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the model and write components, point verdicts and entropy tables.
    Analyze(Source),
    /// Run theorem checks (all by default, or the listed ids).
    Check {
        /// Theorem ids: L1.1 1.1 1.2 1.3 1.4 A1 B1 L2.1.
        ids: Vec<String>,
        /// Run every check (the default when no ids are given).
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        source: Source,
    },
    /// Write the entropy table only.
    Entropy(Source),
    /// List or describe built-in systems.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
    /// Write a DOT graph of the chain digraph or its condensation.
    ExportDot {
        #[command(flatten)]
        source: Source,
        /// Index into the δ schedule (default: finest).
        #[arg(long)]
        delta_index: Option<usize>,
        /// Export the component condensation instead of the full digraph.
        #[arg(long)]
        condensation: bool,
    },
}

#[derive(Subcommand, Debug)]
enum ZooAction {
    List,
    Describe {
        name: String,
    },
    /// Print the default TOML config of a system.
    Config {
        name: String,
    },
}

struct Prepared {
    cfg: RunConfig,
    ctx: Context,
    stamp: Stamp,
    out: PathBuf,
}

fn load(src: &Source) -> Result<RunConfig> {
    let mut cfg = match (&src.config, &src.system) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(name)) => zoo::lookup(name)?.config(),
        (None, None) => {
            return Err(Error::Config(
                "one of --config or --system is required".into(),
            ))
        }
    };
    if let Some(out) = &src.out {
        cfg.run.out = out.display().to_string();
    }
    if let Some(j) = src.jobs {
        cfg.run.jobs = j;
    }
    if let Some(s) = src.seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn prepare(cfg: RunConfig) -> Result<Prepared> {
    let ctx = Context::from_config(&cfg)?;
    let stamp = Stamp::new(&cfg, &ctx.system);
    let out = PathBuf::from(&cfg.run.out);
    Ok(Prepared {
        cfg,
        ctx,
        stamp,
        out,
    })
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `f` on a pool of `jobs` workers, then writes the text it produced.
fn run_pool(
    out: &mut dyn Write,
    jobs: usize,
    f: impl FnOnce(&mut String) -> Result<i32> + Send,
) -> Result<i32> {
    let (code, text) = with_jobs(jobs, || {
        let mut text = String::new();
        f(&mut text).map(|c| (c, text))
    })??;
    out.write_all(text.as_bytes()).map_err(io)?;
    Ok(code)
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn run_command(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Zoo { action } => {
            match action {
                ZooAction::List => {
                    for e in &zoo::ZOO {
                        writeln!(out, "{:<12} {}", e.name, e.summary).map_err(io)?;
                    }
                }
                ZooAction::Describe { name } => {
                    write!(out, "{}", zoo::lookup(&name)?.describe()).map_err(io)?
                }
                ZooAction::Config { name } => {
                    write!(out, "{}", zoo::lookup(&name)?.config().to_toml()).map_err(io)?
                }
            }
            Ok(0)
        }
        Command::Analyze(src) => {
            let cfg = load(&src)?;
            run_pool(out, cfg.run.jobs, |text: &mut String| -> Result<i32> {
                let p = prepare(cfg)?;
                let docs = analyze_documents(&p.ctx, &p.stamp)?;
                write_documents(&p.out, &docs)?;
                let d = &p.ctx.decomps[p.ctx.finest_delta()];
                writeln!(
                    text,
                    "{}: {} nodes, {} components ({} terminal) at delta={}; wrote {} files to {}",
                    p.ctx.system,
                    p.ctx.model.len(),
                    d.components.len(),
                    d.terminal_components().len(),
                    p.cfg.schedule.finest_delta(),
                    docs.len(),
                    p.out.display()
                )
                .expect("write to string");
                Ok(0)
            })
        }
        Command::Check { ids, all, source } => {
            let mut cfg = load(&source)?;
            if !all && !ids.is_empty() {
                cfg.run.theorems = ids;
            }
            if all {
                cfg.run.theorems.clear();
            }
            run_pool(out, cfg.run.jobs, |text: &mut String| -> Result<i32> {
                let p = prepare(cfg)?;
                let (docs, checks) = check_documents(&p.ctx, &p.cfg.run.theorems, &p.stamp)?;
                write_documents(&p.out, &docs)?;
                let mut code = 0;
                for c in &checks {
                    let extra = c
                        .failed_hypothesis
                        .as_deref()
                        .map(|h| format!(" ({h})"))
                        .unwrap_or_default();
                    writeln!(
                        text,
                        "{:<12} {:<5} {}{extra}",
                        c.system,
                        c.theorem,
                        c.status.as_str()
                    )
                    .expect("write to string");
                    if !c.status.is_success() {
                        code = 1;
                    }
                }
                Ok(code)
            })
        }
        Command::Entropy(src) => {
            let cfg = load(&src)?;
            run_pool(out, cfg.run.jobs, |text: &mut String| -> Result<i32> {
                let p = prepare(cfg)?;
                let doc = csv_document(
                    "entropy.csv",
                    &p.stamp,
                    &ENTROPY_HEADER,
                    &entropy_rows(&p.ctx)?,
                )?;
                write_documents(&p.out, std::slice::from_ref(&doc))?;
                write!(text, "{}", doc.content).expect("write to string");
                Ok(0)
            })
        }
        Command::ExportDot {
            source,
            delta_index,
            condensation,
        } => {
            let cfg = load(&source)?;
            run_pool(out, cfg.run.jobs, |text: &mut String| -> Result<i32> {
                let p = prepare(cfg)?;
                let dj = delta_index.unwrap_or(p.ctx.finest_delta());
                if dj >= p.ctx.digraphs.len() {
                    return Err(Error::Config(format!(
                        "delta index {dj} out of range (schedule has {} deltas)",
                        p.ctx.digraphs.len()
                    )));
                }
                let (g, d) = (&p.ctx.digraphs[dj], &p.ctx.decomps[dj]);
                let doc = if condensation {
                    Document {
                        name: "condensation.dot".into(),
                        content: condensation_dot(&p.stamp, d, g.delta()),
                    }
                } else {
                    Document {
                        name: "chains.dot".into(),
                        content: digraph_dot(&p.stamp, &p.ctx.model, g, d),
                    }
                };
                write_documents(&p.out, std::slice::from_ref(&doc))?;
                writeln!(text, "wrote {}", p.out.join(&doc.name).display())
                    .expect("write to string");
                Ok(0)
            })
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 success, 1 check violation or partial
/// check, 2 config error, 3 capacity error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match run_command(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
