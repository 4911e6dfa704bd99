fn main() {
    std::process::exit(see_mimo::cli::run(std::env::args_os()));
}
