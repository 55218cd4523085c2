fn main() {
    std::process::exit(pltune::cli::run(std::env::args_os()));
}
