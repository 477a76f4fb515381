fn main() -> std::process::ExitCode {
    eulerflow::cli::run_from(std::env::args_os())
}
