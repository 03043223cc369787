fn main() {
    std::process::exit(cgmmse::cli::run(std::env::args_os()));
}
