fn main() -> std::process::ExitCode {
    ffpaxos::cli::main()
}
