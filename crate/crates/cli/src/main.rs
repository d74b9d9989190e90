use clap::Parser;

fn main() {
    let cli = mixlab_cli::Cli::parse();
    match mixlab_cli::run(cli) {
        Ok(status) => std::process::exit(status),
        Err(e) => {
            eprintln!("mixlab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
