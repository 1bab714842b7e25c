fn main() {
    std::process::exit(ufslam::cli::main_with(std::env::args_os()));
}
