fn main() { std::process::exit(netreach::cli::run(std::env::args())) }
