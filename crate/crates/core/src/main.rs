fn main() {
    std::process::exit(bht_rl::harness::cli::run_cli(std::env::args_os()));
}
