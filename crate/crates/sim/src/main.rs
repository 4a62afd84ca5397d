fn main() {
    std::process::exit(qdr_sim::cli::main_with_args(std::env::args_os()));
}
