fn main() {
    std::process::exit(dsrn::cli::run(std::env::args_os()));
}
