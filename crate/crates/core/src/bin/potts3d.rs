fn main() {
    std::process::exit(potts3d::cli::main_from_env());
}
