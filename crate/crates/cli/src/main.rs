//! `hypercauchy --config <file>`: runs one experiment (or the full suite),
//! writes its CSV artifacts and a summary, and reports through the exit code.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for a
//! missing or malformed config or any other error before results exist.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

use config::{Config, Kind};
use run::{Ctx, Outcome};

#[derive(Parser, Debug)]
#[command(name = "hypercauchy", version, about = "Run a hypercauchy experiment config")]
struct Args {
    /// Experiment config (`[section]` headers with `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`. Defaults to the current directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Leave out the `# generated <unix seconds>` first line of every CSV.
    #[arg(long)]
    no_timestamp: bool,
    /// Random seed; overrides `[experiment] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

const THREADS_VAR: &str = "HYPERCAUCHY_THREADS";

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("{THREADS_VAR}={v}: expected a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn write_all(dir: &Path, outcomes: &[Outcome], summary: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for o in outcomes {
        for a in &o.artifacts {
            std::fs::write(dir.join(&a.file), &a.contents)?;
        }
    }
    std::fs::write(dir.join("summary.txt"), summary)
}

fn summarize(outcomes: &[Outcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        s.push_str(&format!("{} {}\n", if o.passed { "PASS" } else { "FAIL" }, o.name));
        for l in &o.lines {
            s.push_str(&format!("  {l}\n"));
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    s.push_str(&format!("{} experiments, {failed} failed\n", outcomes.len()));
    s
}

fn main() -> ExitCode {
    let args = Args::parse();
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    };
    if let Err(e) = configure_threads() {
        return fail(e);
    }
    let cfg = match Config::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let ctx = Ctx {
        header: (!args.no_timestamp).then(|| {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            format!("generated {secs}")
        }),
        seed: args.seed.unwrap_or(cfg.seed),
    };
    let jobs = match (cfg.kind, &cfg.experiment) {
        (Kind::All, _) => run::full_suite(),
        (_, Some(e)) => vec![(cfg.name.clone(), e.clone(), cfg.controls.clone())],
        (_, None) => unreachable!("every single kind carries its parameters"),
    };
    let mut outcomes = Vec::new();
    for (name, e, ctl) in &jobs {
        match run::run(name, e, ctl, &ctx) {
            Ok(o) => {
                if !args.quiet {
                    println!("{} {}", if o.passed { "PASS" } else { "FAIL" }, o.name);
                    for l in &o.lines {
                        println!("  {l}");
                    }
                }
                outcomes.push(o);
            }
            Err(e) => return fail(format!("{name}: {e}")),
        }
    }
    let summary = summarize(&outcomes);
    let dir = args.out_dir.or(cfg.out_dir).unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = write_all(&dir, &outcomes, &summary) {
        return fail(format!("writing {}: {e}", dir.display()));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if !args.quiet {
        println!("{} experiments, {failed} failed; outputs in {}", outcomes.len(), dir.display());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
