fn main() {
    std::process::exit(nhqc::cli::main_exit_code());
}
