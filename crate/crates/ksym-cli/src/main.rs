use std::process::exit;

fn main() {
    exit(ksym_cli::run(std::env::args_os()));
}
