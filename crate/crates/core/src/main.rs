fn main() {
    std::process::exit(htstep::cli::main_with_args(std::env::args_os()));
}
