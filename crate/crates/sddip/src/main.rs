fn main() {
    std::process::exit(sddip::cli::run(std::env::args_os()));
}
