fn main() -> std::process::ExitCode {
    cislda::cli::main()
}
