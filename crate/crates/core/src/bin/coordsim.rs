fn main() {
    std::process::exit(coordsim::harness::cli::run_cli(std::env::args_os()));
}
