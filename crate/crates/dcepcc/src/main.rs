fn main() {
    std::process::exit(dcepcc::cli::run(std::env::args_os()));
}
