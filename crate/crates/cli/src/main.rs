fn main() -> std::process::ExitCode {
    spadsim_cli::main_entry()
}
