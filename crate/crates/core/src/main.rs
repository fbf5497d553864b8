fn main() {
    std::process::exit(hajlasz::cli::run(std::env::args_os()));
}
