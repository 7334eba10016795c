fn main() {
    std::process::exit(stashkit_cli::run_cli(std::env::args_os()));
}
