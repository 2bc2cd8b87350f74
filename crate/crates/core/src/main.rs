fn main() {
    std::process::exit(transduce::cli::run(std::env::args_os()));
}
