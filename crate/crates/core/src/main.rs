fn main() {
    mlgp::cli::init_logging();
    std::process::exit(mlgp::cli::main_with_args(std::env::args_os()));
}
