mod args;
mod commands;

use clap::{CommandFactory, FromArgMatches};
use poolaudit_core::error::exit;

use args::Cli;

fn version_text() -> String {
    let mut s = poolaudit_core::pipeline::TOOL_VERSION.to_string();
    for (name, v) in poolaudit_core::pipeline::data_versions() {
        s.push_str(&format!("\n{name}: {v}"));
    }
    s
}

fn main() {
    let version = version_text();
    let matches = Cli::command()
        .version(version.clone())
        .long_version(version)
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "warn" } else { "info" }))
        .format_timestamp(None)
        .init();
    let code = match commands::dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            match &e {
                poolaudit_core::Error::Config(list) => {
                    eprintln!("error: invalid configuration");
                    for m in list {
                        eprintln!("  - {m}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    };
    std::process::exit(code);
}
