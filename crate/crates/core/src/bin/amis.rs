fn main() {
    std::process::exit(amis_core::cli::main_with_args(std::env::args_os()));
}
