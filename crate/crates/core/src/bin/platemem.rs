fn main() {
    std::process::exit(platemem::cli::main_with_args(std::env::args_os()));
}
