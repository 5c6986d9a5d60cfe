fn main() {
    std::process::exit(crt_effects::cli::main_with_args(std::env::args_os()));
}
