fn main() {
    std::process::exit(bernoulli_cli::app::main_with(std::env::args_os()));
}
