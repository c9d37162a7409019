fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    burgers_duality::cli::configure_threads_from_env();
    std::process::exit(burgers_duality::cli::main_with_args(std::env::args_os()));
}
