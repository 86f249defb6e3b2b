fn main() {
    std::process::exit(tcellsim::cli::main_with_args(std::env::args_os()));
}
