fn main() {
    // Rust ignores SIGPIPE by default, which turns `pathsim ... | head`
    // into a broken-pipe panic; restore the conventional termination.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(pathsim::cli::run(std::env::args_os()));
}
