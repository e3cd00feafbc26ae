fn main() {
    std::process::exit(asf_cli::run());
}
