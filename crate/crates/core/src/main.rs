fn main() {
    std::process::exit(econeval::cli::main());
}
