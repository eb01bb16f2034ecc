//! Shared fixtures for the workspace's end-to-end tests.

pub mod fixtures;

/// Runs one `spadsim` invocation in-process and returns its report output,
/// panicking with the error and progress log on failure.
pub fn cli(args: &[&str]) -> String {
    let mut console = Vec::new();
    let mut log = Vec::new();
    let argv = std::iter::once("spadsim").chain(args.iter().copied());
    if let Err(e) = spadsim_cli::run(argv, &mut console, &mut log) {
        panic!("spadsim {args:?} failed: {e}\n{}", String::from_utf8_lossy(&log));
    }
    String::from_utf8(console).unwrap()
}
