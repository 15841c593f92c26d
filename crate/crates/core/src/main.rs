fn main() {
    std::process::exit(catmatch::cli::main());
}
