fn main() {
    std::process::exit(cbkdv::cli::run(std::env::args_os()));
}
