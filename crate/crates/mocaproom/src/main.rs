fn main() {
    std::process::exit(mocaproom::cli::run());
}
