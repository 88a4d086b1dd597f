fn main() {
    std::process::exit(p2dyn_cli::run(std::env::args_os()));
}
