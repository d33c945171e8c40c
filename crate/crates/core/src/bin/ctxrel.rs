fn main() {
    env_logger::init();
    std::process::exit(ctxrel::cli::run(std::env::args_os()));
}
