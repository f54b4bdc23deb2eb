fn main() {
    std::process::exit(oswcal_cli::run(std::env::args_os()));
}
