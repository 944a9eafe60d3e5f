fn main() {
    std::process::exit(tesmr::cli::main_with_args(std::env::args_os()));
}
