use clap::Parser;
use splinenet_cli::error::{EXIT_OK, EXIT_USAGE};
use splinenet_cli::{run, Cli};
use std::process::exit;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            exit(code);
        }
    };
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = run(cli, &mut stdout) {
        eprintln!("error: {e}");
        exit(e.exit_code());
    }
}
