fn main() {
    std::process::exit(spancert::bench::cli_main(std::env::args_os()));
}
