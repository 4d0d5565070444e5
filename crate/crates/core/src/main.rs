fn main() {
    std::process::exit(qhu_core::cli::run(std::env::args_os()));
}
