fn main() {
    std::process::exit(kamtori::cli::run(std::env::args_os()));
}
