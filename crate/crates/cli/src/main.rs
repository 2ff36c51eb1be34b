use std::process::ExitCode;

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (`retrig list-presets | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    // SAFETY: resetting SIGPIPE to the default disposition before any other
    // thread exists.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    ExitCode::from(retrig_cli::cli_main(&args))
}
