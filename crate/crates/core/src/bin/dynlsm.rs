fn main() {
    std::process::exit(dynlsm::cli::run(std::env::args_os()));
}
