fn main() {
    std::process::exit(ctiv::cli::run(std::env::args_os()));
}
