// Rust ignores SIGPIPE by default, which turns `pdreg ... | head` into a
// panic on the first print after the reader closes. Restore the default
// disposition so a closed pipe terminates the process quietly.
#[cfg(unix)]
fn restore_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_sigpipe() {}

fn main() {
    restore_sigpipe();
    std::process::exit(pdreg::harness::cli_dispatch(std::env::args_os()));
}
