fn main() {
    let code = nahas::cli::main_with_args(std::env::args_os());
    nahas::cli::flush_stdout();
    std::process::exit(code);
}
