fn main() {
    std::process::exit(privseg::cli::run(std::env::args_os()));
}
