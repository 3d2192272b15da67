fn main() {
    std::process::exit(betarc_cli::main_with_args(std::env::args_os()));
}
