fn main() {
    std::process::exit(zdtree::cli::main_with_args(std::env::args_os()));
}
