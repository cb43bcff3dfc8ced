fn main() {
    std::process::exit(gmdalign_cli::run(std::env::args_os()));
}
