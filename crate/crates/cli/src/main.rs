fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(inkflux_cli::run_command(&argv));
}
