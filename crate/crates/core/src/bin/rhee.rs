fn main() {
    std::process::exit(rhee::cli::run(std::env::args_os()));
}
