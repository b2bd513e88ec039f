fn main() {
    std::process::exit(cartan_synth::cli::run(std::env::args_os()));
}
