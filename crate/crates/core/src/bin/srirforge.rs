fn main() {
    std::process::exit(srirforge::cli::main());
}
