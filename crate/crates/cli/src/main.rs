fn main() {
    std::process::exit(cwta_cli::main_with_args(std::env::args_os()));
}
