fn main() {
    std::process::exit(nsdde_cli::run(std::env::args_os()));
}
