fn main() {
    std::process::exit(polynorm::cli::run(std::env::args_os()));
}
