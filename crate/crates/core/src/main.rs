fn main() {
    std::process::exit(biopro::cli::main_with_args(std::env::args_os()));
}
