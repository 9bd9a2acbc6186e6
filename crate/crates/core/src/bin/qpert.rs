fn main() {
    std::process::exit(qpert::cli::main_with(std::env::args_os()));
}
