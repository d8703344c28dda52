fn main() {
    std::process::exit(qtwist::cli::main_with_args(std::env::args_os()));
}
