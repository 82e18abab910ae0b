use clap::Parser;

fn main() {
    let cli = funnel_cli::Cli::parse();
    std::process::exit(funnel_cli::execute(cli));
}
