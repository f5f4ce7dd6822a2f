fn main() {
    std::process::exit(mpqc::cli::run(std::env::args_os()));
}
