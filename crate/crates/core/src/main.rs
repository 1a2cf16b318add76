fn main() {
    std::process::exit(mnl::cli::run(std::env::args_os()));
}
