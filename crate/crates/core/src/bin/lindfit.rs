fn main() {
    std::process::exit(lindfit::cli::run(std::env::args_os()));
}
