fn main() {
    std::process::exit(noborrow_cli::run(std::env::args_os()));
}
