fn main() {
    std::process::exit(curvequant::cli::main_with_args(std::env::args_os()));
}
