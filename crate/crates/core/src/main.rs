fn main() {
    std::process::exit(tree_spectrum::cli::run(std::env::args_os()));
}
