fn main() {
    std::process::exit(acvseg::cli::run(std::env::args_os()));
}
