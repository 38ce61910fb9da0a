fn main() {
    std::process::exit(spca::cli::main_with_args(std::env::args_os()));
}
