fn main() {
    std::process::exit(riskclass_cli::run_from_args(std::env::args_os()));
}
