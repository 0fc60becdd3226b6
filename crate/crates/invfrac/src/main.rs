fn main() {
    std::process::exit(invfrac::cli::run());
}
