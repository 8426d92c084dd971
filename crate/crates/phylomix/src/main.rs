fn main() {
    std::process::exit(phylomix::cli::run(std::env::args_os()));
}
