fn main() {
    std::process::exit(fedsecure::cli::run_command(std::env::args_os()));
}
