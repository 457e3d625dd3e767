fn main() {
    std::process::exit(dcevae::cli::main_with_args(std::env::args_os()));
}
