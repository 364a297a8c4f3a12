fn main() -> std::process::ExitCode {
    capax::cli::main()
}
