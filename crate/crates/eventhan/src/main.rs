fn main() {
    std::process::exit(eventhan::cli::run());
}
