fn main() {
    std::process::exit(regobs::cli::run(std::env::args_os()));
}
