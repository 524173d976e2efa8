fn main() {
    std::process::exit(kfree_core::cli::run(std::env::args_os()));
}
