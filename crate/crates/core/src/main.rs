fn main() -> std::process::ExitCode {
    symfin::cli::main()
}
