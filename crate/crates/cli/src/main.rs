fn main() {
    std::process::exit(rsf_cli::run(std::env::args_os()));
}
