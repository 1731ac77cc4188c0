fn main() {
    std::process::exit(lzap::cli::run(std::env::args_os()));
}
