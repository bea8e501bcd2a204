fn main() {
    std::process::exit(relaysim::cli::main_with_args(std::env::args()));
}
