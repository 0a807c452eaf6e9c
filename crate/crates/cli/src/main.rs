use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use surfloss_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| out.commit().map(|()| out));
    match result {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("surfloss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
