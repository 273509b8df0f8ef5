fn main() {
    std::process::exit(spnodal::cli::run(std::env::args_os()));
}
