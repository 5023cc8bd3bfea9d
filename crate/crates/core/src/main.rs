fn main() {
    std::process::exit(dfd_core::cli::run(std::env::args_os()));
}
