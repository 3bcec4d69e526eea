fn main() -> std::process::ExitCode {
    aqmap::cli::main()
}
