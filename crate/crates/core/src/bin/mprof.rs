fn main() {
    std::process::exit(memento_profiles::cli::run(std::env::args_os()));
}
