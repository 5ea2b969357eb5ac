fn main() {
    std::process::exit(erica::cli::main());
}
