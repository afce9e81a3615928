fn main() {
    std::process::exit(saddle_lab::cli::run(std::env::args_os()));
}
