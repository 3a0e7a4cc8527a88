fn main() {
    std::process::exit(sevfdr::cli::run(std::env::args_os()));
}
