mod args;
mod commands;
mod config;
mod envelope;
mod error;
mod io;

use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let ctx = match config::load(cli.config.as_deref()) {
        Ok(file) => Ctx {
            file,
            print_config: cli.print_config,
            timing: cli.timing,
        },
        Err(err) => exit_with(err),
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a, &ctx),
        Command::FitEnsemble(a) => commands::fit_ensemble(a, &ctx),
        Command::FitSingle(a) => commands::fit_single(a, &ctx),
        Command::Imbalance(a) => commands::imbalance(a, &ctx),
        Command::Localize(a) => commands::localize(a, &ctx),
        Command::MwAngle(a) => commands::mw_angle(a, &ctx),
    };
    if let Err(err) = result {
        exit_with(err);
    }
}

fn exit_with(err: error::CliError) -> ! {
    eprintln!("error: {err}");
    std::process::exit(err.exit_code());
}
