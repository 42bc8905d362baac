mod args;
mod manifest;
mod prepare;
mod run;
mod scale;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use manifest::{rewrite_out, RunManifest};

/// Exit status after training diverged.
const EXIT_DIVERGED: u8 = 3;

fn dispatch(command: &Command, raw: &[String]) -> Result<()> {
    match command {
        Command::Prepare(a) => prepare::run(a, raw),
        Command::Train(a) => run::run_train(a, raw),
        Command::Eval(a) => run::run_eval(a, raw),
        Command::Ablate(a) => run::run_ablate(a, raw),
        Command::Scale(a) => scale::run(a, raw),
        Command::Replay(a) => {
            let m = RunManifest::load(&a.manifest)?;
            let args = match &a.out {
                Some(out) => rewrite_out(&m.args, out),
                None => m.args.clone(),
            };
            let argv = std::iter::once("dines".to_string()).chain(args.iter().cloned());
            let cli = Cli::try_parse_from(argv)?;
            if matches!(cli.command, Command::Replay(_)) {
                anyhow::bail!("a manifest cannot record a replay");
            }
            log::info!("replaying `{}` from {}", m.command, a.manifest.display());
            dispatch(&cli.command, &args)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match dispatch(&cli.command, &raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let diverged = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<dines::Error>(), Some(dines::Error::Diverged { .. })));
            ExitCode::from(if diverged { EXIT_DIVERGED } else { 1 })
        }
    }
}
