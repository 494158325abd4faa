fn main() {
    std::process::exit(tsfact::cli::run_command(std::env::args_os()));
}
