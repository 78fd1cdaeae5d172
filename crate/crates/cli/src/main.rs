fn main() {
    std::process::exit(gptunnel_cli::run_from_args(std::env::args_os()));
}
