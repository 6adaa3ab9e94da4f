fn main() {
    std::process::exit(mapf_ltm::cli::run_cli(std::env::args_os()));
}
