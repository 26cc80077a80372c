fn main() {
    std::process::exit(closedloop::cli::main_with_args(std::env::args_os()));
}
