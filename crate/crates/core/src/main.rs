fn main() {
    std::process::exit(qcsm::cli::main_with_args(std::env::args_os()));
}
