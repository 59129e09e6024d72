fn main() -> std::process::ExitCode {
    ddsp_vocal::cli::main()
}
