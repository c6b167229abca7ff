fn main() {
    std::process::exit(boundedrank::cli::main_with_args(std::env::args_os()));
}
