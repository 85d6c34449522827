fn main() { std::process::exit(passio::cli::run_from_env()); }
