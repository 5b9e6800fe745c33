fn main() -> std::process::ExitCode {
    fpp::cli::main()
}
