fn main() {
    env_logger::init();
    std::process::exit(kerrsim::cli::main_with(std::env::args_os()));
}
