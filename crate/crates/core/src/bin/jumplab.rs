fn main() {
    std::process::exit(jumplab::cli::run_command(std::env::args_os()));
}
