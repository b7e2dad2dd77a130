fn main() {
    std::process::exit(filmcrew::cli::run(std::env::args_os()));
}
