fn main() {
    std::process::exit(swarm_limit::cli::main_with(std::env::args_os()));
}
