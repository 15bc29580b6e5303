fn main() -> std::process::ExitCode {
    foodbench_cli::run(std::env::args_os())
}
