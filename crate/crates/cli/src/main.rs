fn main() {
    std::process::exit(kpnn_cli::main_with_args(std::env::args_os()));
}
