fn main() {
    std::process::exit(rol::cli::main_from_args(std::env::args_os()));
}
