fn main() {
    std::process::exit(ergodic_lab::cli::main());
}
