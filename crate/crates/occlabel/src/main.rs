use clap::Parser;

fn main() {
    let cli = occlabel::cli::Cli::parse();
    if let Err(e) = occlabel::cli::run(cli) {
        eprintln!("{}", occlabel::cli::error_line(&e));
        std::process::exit(1);
    }
}
