use clap::Parser;

fn main() {
    let cli = epsim::cli::Cli::parse();
    if let Err(err) = epsim::cli::run(cli) {
        eprintln!("error: {err}");
        let mut source = std::error::Error::source(&err);
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(1);
    }
}
