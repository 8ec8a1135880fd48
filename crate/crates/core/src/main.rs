fn main() {
    std::process::exit(posebench::cli::main_with(std::env::args_os()));
}
