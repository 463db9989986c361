fn main() {
    std::process::exit(gauss_match::cli::main());
}
