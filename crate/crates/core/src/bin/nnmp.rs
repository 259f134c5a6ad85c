fn main() -> std::process::ExitCode {
    discrete_nnmp::cli::main_from_env()
}
