fn main() {
    std::process::exit(riskdec::cli::main_from_env());
}
