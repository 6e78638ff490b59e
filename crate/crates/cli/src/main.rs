fn main() {
    std::process::exit(scfde_cli::run(std::env::args_os()));
}
