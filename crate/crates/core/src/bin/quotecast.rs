fn main() {
    std::process::exit(quotecast::tools::cli_main(std::env::args_os()));
}
