fn main() {
    std::process::exit(trendlens::cli::run(std::env::args_os()));
}
