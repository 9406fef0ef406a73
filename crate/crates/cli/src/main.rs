mod args;
mod commands;
mod inputs;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::Outcome;

/// Error raised for invalid flag combinations detected after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(rprobe::Error::Parameter(_)) = cause.downcast_ref::<rprobe::Error>() {
            return 2;
        }
    }
    1
}

fn resolve_threads(flag: Option<usize>) -> anyhow::Result<usize> {
    match std::env::var("RPROBE_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("RPROBE_THREADS={v:?} is not a thread count"))),
        _ => Ok(flag.unwrap_or(0)),
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Cca(a) => commands::similarity::cca(a, g),
        Command::Cka(a) => commands::similarity::cka(a, g),
        Command::Procrustes(a) => commands::similarity::procrustes(a, g),
        Command::Mi(a) => commands::similarity::mi(a, g),
        Command::Linprobe(a) => commands::similarity::linprobe(a, g),
        Command::Awd(a) => commands::tasks::awd(a, g),
        Command::Wordseg(a) => commands::tasks::wordseg(a, g),
        Command::Sts(a) => commands::tasks::sts(a, g),
        Command::Pool(a) => commands::tasks::pool(a, g),
        Command::TrendCorr(a) => commands::trend::trend_corr(a, g),
        Command::NerEval(a) => commands::slu::ner_eval(a, g),
        Command::NelEval(a) => commands::slu::nel_eval(a, g),
        Command::Selfcheck => commands::selfcheck(g),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = resolve_threads(cli.global.threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    let outcome = dispatch(&cli)?;
    if let Some(dir) = &cli.global.out {
        output::emit(dir, &cli, rayon::current_num_threads(), &outcome)?;
    }
    println!("{}", outcome.summary);
    if outcome.failed {
        anyhow::bail!("{} reported failures", cli.command.name());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
