fn main() {
    std::process::exit(moment_rep::cli::run(std::env::args_os()));
}
