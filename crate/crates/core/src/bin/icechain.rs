fn main() {
    std::process::exit(icechain::cli::main_with_args(std::env::args_os()));
}
