fn main() {
    std::process::exit(flopcalc::cli::run_command(std::env::args_os()));
}
