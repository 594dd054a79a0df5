use std::process::exit;

fn main() {
    exit(tgc_lstm::cli::run(std::env::args_os()));
}
