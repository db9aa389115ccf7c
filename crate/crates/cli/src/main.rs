fn main() {
    std::process::exit(trimtree_cli::run(std::env::args_os()));
}
