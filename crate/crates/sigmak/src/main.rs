fn main() {
    std::process::exit(sigmak::cli::run(std::env::args_os()));
}
