fn main() {
    std::process::exit(hypercube_pam::harness::run_cli(std::env::args_os()));
}
