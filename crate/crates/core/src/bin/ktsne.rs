fn main() {
    if let Err(msg) = ktsne::cli::configure_threads() {
        eprintln!("error: {msg}");
        std::process::exit(ktsne::cli::EXIT_USAGE);
    }
    std::process::exit(ktsne::cli::run(std::env::args_os()));
}
