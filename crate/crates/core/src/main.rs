fn main() {
    std::process::exit(galaxysearch::cli::run(std::env::args_os()));
}
