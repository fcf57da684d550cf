fn main() {
    std::process::exit(pvtiles::cli::run(std::env::args_os()));
}
