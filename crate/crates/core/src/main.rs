use clap::Parser;

use dataselect::cli::{execute, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap reserves 2 for usage errors; our contract wants 1
            let code = if err.exit_code() == 0 { 0 } else { 1 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .expect("rayon pool already initialized");
    }
    if let Err(err) = execute(cli.command) {
        eprintln!("error: {err}");
        let mut cause = std::error::Error::source(&err);
        while let Some(c) = cause {
            eprintln!("  caused by: {c}");
            cause = c.source();
        }
        std::process::exit(err.exit_code());
    }
}
