fn main() {
    std::process::exit(depth_jel::cli::main_with_args(std::env::args_os()));
}
