use disentangle::cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = cli::run(std::env::args_os()) {
        eprintln!("{}", cli::error_line(&e));
        std::process::exit(cli::exit_code(&e));
    }
}
