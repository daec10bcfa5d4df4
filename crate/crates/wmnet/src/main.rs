fn main() {
    std::process::exit(wmnet::cli::main_with_args(std::env::args_os()));
}
