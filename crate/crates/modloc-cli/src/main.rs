fn main() {
    std::process::exit(modloc_cli::run(std::env::args_os()));
}
