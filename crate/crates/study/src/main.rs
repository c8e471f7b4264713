fn main() {
    std::process::exit(aeul_study::cli::main_with_args(std::env::args_os()));
}
