fn main() {
    std::process::exit(ttfs_snn::cli::run_command(std::env::args_os()));
}
