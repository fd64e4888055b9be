fn main() {
    std::process::exit(siamese_reid::cli::run(std::env::args_os()));
}
