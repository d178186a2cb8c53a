fn main() {
    std::process::exit(distres::cli::run(std::env::args_os()));
}
