fn main() {
    std::process::exit(inducer::run(std::env::args_os()));
}
