fn main() {
    std::process::exit(robin_cde_cli::main_with_args(std::env::args_os()));
}
