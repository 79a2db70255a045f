fn main() {
    std::process::exit(qmaxwell::cli::run(std::env::args_os()));
}
