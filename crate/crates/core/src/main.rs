fn main() {
    std::process::exit(smiles_bert::cli::run(std::env::args_os()));
}
