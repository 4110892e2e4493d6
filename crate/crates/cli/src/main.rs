//! `polydawg` command line: load data, generate the demo dataset, run and
//! explain polystore queries, and inspect the monitor log.
//!
//! Exit codes: 0 success, 1 usage or I/O failure, 2 query error,
//! 3 internal-consistency error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use polydawg::config::Config;
use polydawg::datagen;
use polydawg::engines::{Catalog, DimSpec, EngineId, LoadOptions};
use polydawg::executor::{System, SystemClock};
use polydawg::monitor::Monitor;
use polydawg::{cif, Error};

#[derive(Parser)]
#[command(
    name = "polydawg",
    version,
    about = "Polystore over relational, key-value and array engines"
)]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random plan choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a CIF file as a new object on an engine.
    Load {
        engine: String,
        object: String,
        path: PathBuf,
        /// Key columns, comma-separated (relational).
        #[arg(long, value_delimiter = ',')]
        key: Option<Vec<String>>,
        /// Dimension columns, comma-separated (array).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<String>>,
    },
    /// Run a query in production mode, or training mode with --training.
    Query {
        text: String,
        #[arg(long)]
        training: bool,
    },
    /// Show containers, remainder, signature and candidate plans.
    Explain { text: String },
    /// Write the synthetic clinical dataset as CIF files.
    Datagen {
        #[arg(long)]
        scale: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Inspect the monitor log.
    Monitor {
        #[command(subcommand)]
        cmd: MonitorCmd,
    },
    /// Read queries line by line; `:train` and `:explain` prefixes switch mode.
    Repl,
}

#[derive(Subcommand)]
enum MonitorCmd {
    /// Print the log verbatim.
    Dump,
    /// Mean runtime per plan for a signature structure.
    Stats { structure: String },
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Consistency(_) => 3,
            Error::Io(_) | Error::Config(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: format!("error: {e}"),
        }
    }
}

/// Query errors carry a caret under the offending span when there is one.
fn query_failure(text: &str, e: Error) -> Failure {
    let shown = caret(text, &e);
    let mut f = Failure::from(e);
    if let Some(m) = shown {
        f.message = format!("{}\n{m}", f.message);
    }
    f
}

/// The query line with a caret run under the offending span.
fn caret(text: &str, e: &Error) -> Option<String> {
    let span = e.span()?;
    let start = span.start.min(text.len());
    let end = span.end.clamp(start + 1, text.len().max(start + 1));
    let pad = text[..start].chars().count();
    let width = text
        .get(start..end.min(text.len()))
        .map_or(1, |s| s.chars().count().max(1));
    Some(format!("  {text}\n  {}{}", " ".repeat(pad), "^".repeat(width)))
}

fn config(cli: &Cli) -> Result<Config, Failure> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    Ok(c)
}

fn open_system(c: &Config) -> Result<System, Failure> {
    let catalog = Catalog::open_snapshot(&c.data_dir)?;
    let monitor = Monitor::open(&c.monitor_log, c.monitor())?;
    Ok(System::new(
        catalog,
        monitor,
        Arc::new(SystemClock::default()),
        &c.system(),
    )?)
}

fn load(
    c: &Config,
    engine: &str,
    object: &str,
    path: &Path,
    key: Option<Vec<String>>,
    dims: Option<Vec<String>>,
) -> Result<String, Failure> {
    let catalog = Catalog::open_snapshot(&c.data_dir)?;
    let table = cif::read_file(path).map_err(|e| Failure {
        code: 1,
        message: format!("error: {}: {e}", path.display()),
    })?;
    let options = LoadOptions {
        key,
        dims: dims.map(|d| d.into_iter().map(DimSpec::named).collect()),
    };
    catalog.load(&EngineId::new(engine), object, &table, &options)?;
    catalog.save_snapshot(&c.data_dir)?;
    Ok(format!("loaded {} rows", table.len()))
}

fn run_query(sys: &System, text: &str, training: bool) -> Result<String, Failure> {
    sys.run_query(text, training)
        .map(|r| r.render())
        .map_err(|e| query_failure(text, e))
}

fn explain(sys: &System, text: &str) -> Result<String, Failure> {
    sys.explain(text).map_err(|e| query_failure(text, e))
}

fn monitor(c: &Config, cmd: &MonitorCmd) -> Result<String, Failure> {
    let m = Monitor::open(&c.monitor_log, c.monitor())?;
    Ok(match cmd {
        MonitorCmd::Dump => m.dump()?,
        MonitorCmd::Stats { structure } => {
            let stats = m.stats(structure);
            if stats.is_empty() {
                return Err(Failure {
                    code: 1,
                    message: format!("error: no records for structure {structure}"),
                });
            }
            stats
                .into_iter()
                .map(|(plan, (mean, n))| format!("{plan}\tmean-ms={mean}\truns={n}\n"))
                .collect()
        }
    })
}

fn repl(sys: &System) -> Result<String, Failure> {
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        s.spawn(|| {
            while !stop.load(Ordering::SeqCst) {
                let _ = sys.drain_background();
                std::thread::sleep(Duration::from_millis(250));
            }
        });
        let stdin = std::io::stdin();
        let mut out = std::io::stdout();
        for line in stdin.lock().lines() {
            let Ok(line) = line else { break };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == ":quit" || line == ":q" {
                break;
            }
            let res = if let Some(q) = line.strip_prefix(":train") {
                run_query(sys, q.trim(), true)
            } else if let Some(q) = line.strip_prefix(":explain") {
                explain(sys, q.trim())
            } else {
                run_query(sys, line, false)
            };
            match res {
                Ok(s) => {
                    let _ = write!(out, "{s}");
                }
                Err(f) => eprintln!("{}", f.message),
            }
            let _ = out.flush();
        }
        stop.store(true, Ordering::SeqCst);
    });
    Ok(String::new())
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    let c = config(cli)?;
    match &cli.cmd {
        Cmd::Load {
            engine,
            object,
            path,
            key,
            dims,
        } => load(&c, engine, object, path, key.clone(), dims.clone()),
        Cmd::Query { text, training } => run_query(&open_system(&c)?, text, *training),
        Cmd::Explain { text } => explain(&open_system(&c)?, text),
        Cmd::Datagen { scale, out } => {
            let files = datagen::generate(*scale, c.seed)?.write(out)?;
            Ok(files.iter().map(|p| format!("{}\n", p.display())).collect())
        }
        Cmd::Monitor { cmd } => monitor(&c, cmd),
        Cmd::Repl => repl(&open_system(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            print!("{out}");
            if !out.is_empty() && !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
