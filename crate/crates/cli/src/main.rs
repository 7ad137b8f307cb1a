fn main() {
    std::process::exit(spinlattice_cli::main_with_args(std::env::args_os()));
}
