fn main() {
    std::process::exit(nonlocal_gamma::cli::main_with_args(std::env::args_os()));
}
