fn main() {
    std::process::exit(bufshuf::cli::run());
}
