fn main() {
    std::process::exit(haarspec_cli::run(std::env::args_os()));
}
