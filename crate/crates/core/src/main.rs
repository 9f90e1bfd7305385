fn main() {
    std::process::exit(gnsch::cli::main_with_args(std::env::args_os()));
}
