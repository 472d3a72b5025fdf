fn main() {
    std::process::exit(qwalk::cli::run_cli(std::env::args_os()));
}
