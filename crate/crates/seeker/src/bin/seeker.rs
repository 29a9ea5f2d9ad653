use std::process::exit;

fn main() {
    exit(seeker::harness::cli::cli_main(std::env::args_os()));
}
