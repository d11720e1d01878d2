fn main() {
    std::process::exit(qmetro_cli::run_cli(std::env::args_os()));
}
