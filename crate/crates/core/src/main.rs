fn main() {
    std::process::exit(stopsim::bench::cli(std::env::args_os()));
}
