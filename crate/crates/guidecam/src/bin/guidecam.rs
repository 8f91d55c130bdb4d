fn main() {
    std::process::exit(guidecam::cli::main_with_args(std::env::args_os()));
}
