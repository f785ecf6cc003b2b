use clap::Parser;

fn main() {
    let cli = mapf_lns_cli::Cli::parse();
    std::process::exit(mapf_lns_cli::run(cli));
}
