fn main() {
    std::process::exit(mrsmnts_cli::dispatch(std::env::args_os()));
}
