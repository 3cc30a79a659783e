fn main() {
    std::process::exit(tmcurv::cli::run(std::env::args_os()));
}
