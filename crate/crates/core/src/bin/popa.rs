fn main() {
    std::process::exit(popa::cli::run(std::env::args_os()));
}
