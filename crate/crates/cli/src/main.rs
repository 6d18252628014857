fn main() {
    std::process::exit(fockbridge_cli::run(std::env::args_os()));
}
