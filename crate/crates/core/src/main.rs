fn main() {
    std::process::exit(scriptalign::cli::main(std::env::args_os()));
}
