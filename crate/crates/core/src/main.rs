fn main() {
    std::process::exit(planar_trap::cli::main_with_args(std::env::args_os()));
}
