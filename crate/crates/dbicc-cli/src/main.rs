fn main() {
    std::process::exit(dbicc_cli::main_with_args(std::env::args_os()));
}
