use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use swapsqueeze_cli::{parse_config, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("swapsqueeze: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let (command, flags) = cli.command.split();
    let result = parse_config(command, &flags).and_then(|cfg| {
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        let mut out = stdout.lock();
        run(&cfg, &mut out, &mut stderr.lock())?;
        out.flush()?;
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swapsqueeze: {e}");
            ExitCode::FAILURE
        }
    }
}
