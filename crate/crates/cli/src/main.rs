use blowup_cli::config::{ConfigErrors, ConfigIssue, RawConfig, RunConfig};
use blowup_cli::run::{run, tolerance, Verb, TOL_ENV};
use blowup_cli::{CliError, CliResult};
use clap::Parser;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Boundary blow-up asymptotics: classify weights, compute profiles,
/// predict expansion constants, solve and verify large solutions.
#[derive(Debug, Parser)]
#[command(name = "blowup", version)]
struct Args {
    #[arg(value_enum)]
    verb: Verb,

    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,

    /// `section.key=v1,v2,...`; each value runs into its own subdirectory.
    #[arg(long)]
    sweep: Option<String>,
}

fn read_raw(path: &Path) -> CliResult<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![ConfigIssue { lines: vec![], msg: format!("cannot read {}: {e}", path.display()) }]))?;
    Ok(RawConfig::parse(&text)?)
}

fn one(verb: Verb, raw: &RawConfig, out: &Path, env_tol: Option<&str>) -> CliResult<String> {
    let cfg = RunConfig::from_raw(raw)?;
    let tol = tolerance(&cfg, env_tol)?;
    run(verb, &cfg, out, tol)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let env_tol = std::env::var(TOL_ENV).ok();
    let raw = match read_raw(&args.config) {
        Ok(r) => r,
        Err(e) => return report(&e),
    };
    let Some(sweep) = &args.sweep else {
        return match one(args.verb, &raw, &args.out, env_tol.as_deref()) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => report(&e),
        };
    };
    let Some((param, values)) = sweep.split_once('=') else {
        return report(&CliError::from(ConfigIssue { lines: vec![], msg: format!("--sweep `{sweep}` must be section.key=v1,v2,...") }));
    };
    // every entry is validated before any runs
    let mut entries = Vec::new();
    let mut problems = Vec::new();
    for v in values.split(',').map(str::trim) {
        let mut r = raw.clone();
        match r.set(param, v).map_err(|e| ConfigErrors(vec![e])).and_then(|_| RunConfig::from_raw(&r).map(|_| r)) {
            Ok(r) => entries.push((v.to_string(), r)),
            Err(e) => problems.extend(e.0.into_iter().map(|mut i| {
                i.msg = format!("{param}={v}: {}", i.msg);
                i
            })),
        }
    }
    if !problems.is_empty() {
        return report(&CliError::Config(ConfigErrors(problems)));
    }
    let results: Vec<(String, CliResult<String>)> = std::thread::scope(|s| {
        let handles: Vec<_> = entries
            .iter()
            .map(|(v, r)| {
                let out = args.out.join(format!("{param}={v}"));
                let env = env_tol.as_deref();
                (v.clone(), s.spawn(move || one(args.verb, r, &out, env)))
            })
            .collect();
        handles.into_iter().map(|(v, h)| (v, h.join().unwrap_or_else(|_| Err(CliError::Io("worker panicked".into()))))).collect()
    });
    let mut code = 0;
    for (v, r) in results {
        println!("== {param}={v}");
        match r {
            Ok(s) => print!("{s}"),
            Err(e) => {
                eprintln!("{e}");
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}

fn report(e: &CliError) -> ExitCode {
    match e {
        CliError::Config(_) => eprintln!("config error:\n{e}"),
        CliError::Verification(s) => eprintln!("{s}verification failed"),
        _ => eprintln!("error: {e}"),
    }
    ExitCode::from(e.exit_code() as u8)
}
