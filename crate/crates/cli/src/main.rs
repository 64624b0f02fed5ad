fn main() -> std::process::ExitCode {
    cvqss_cli::main_entry()
}
