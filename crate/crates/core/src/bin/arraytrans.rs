fn main() {
    std::process::exit(arraytrans::cli::main_with_args(std::env::args_os()));
}
