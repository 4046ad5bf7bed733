fn main() {
    std::process::exit(ecr_core::cli::main_with_args(std::env::args_os()));
}
