fn main() {
    std::process::exit(pathsens::cli::main_entry(std::env::args_os()));
}
