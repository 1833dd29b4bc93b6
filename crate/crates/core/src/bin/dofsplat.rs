fn main() {
    std::process::exit(dofsplat::harness::cli::run_from(std::env::args_os()));
}
