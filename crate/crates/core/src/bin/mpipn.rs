fn main() {
    let code = acoustic_pinn::cli::run(
        std::env::args_os(),
        std::env::var(acoustic_pinn::cli::SEED_ENV).ok(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
