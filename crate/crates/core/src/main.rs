fn main() {
    std::process::exit(parksac::cli::main_with_args(std::env::args_os()));
}
