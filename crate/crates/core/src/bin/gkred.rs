fn main() -> std::process::ExitCode {
    gkred::cli::run(std::env::args_os())
}
