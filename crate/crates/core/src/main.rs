fn main() {
    std::process::exit(maxpat::cli::main_with_args(std::env::args_os()));
}
