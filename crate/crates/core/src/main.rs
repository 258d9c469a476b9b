fn main() {
    std::process::exit(thermofuse::cli::main());
}
