use clap::Parser;

use qdiscrim_cli::{run, Cli, EXIT_OK};

fn main() {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match run(&cli) {
        Ok(files) => {
            for f in &files {
                log::info!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("qdiscrim: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
