fn main() {
    std::process::exit(dti_cli::run());
}
