fn main() {
    std::process::exit(gbbvpa::cli::run(std::env::args_os()));
}
