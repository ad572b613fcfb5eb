fn main() {
    std::process::exit(mcmclab::cli::run(std::env::args_os()));
}
