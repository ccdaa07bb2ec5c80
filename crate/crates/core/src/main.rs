fn main() {
    std::process::exit(medfleet::cli::main_with_args(std::env::args_os()));
}
