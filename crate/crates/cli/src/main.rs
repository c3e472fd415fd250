use clap::Parser;

fn main() {
    let cli = uaris_cli::Cli::parse();
    match uaris_cli::run(cli) {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
