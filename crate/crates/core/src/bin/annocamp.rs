fn main() -> std::process::ExitCode {
    annocamp::cli::main()
}
