use clap::Parser;
use qmem_cli::error::exit;

fn main() {
    let cli = qmem_cli::Cli::parse();
    let code = match qmem_cli::run(&cli) {
        Ok(outcome) => {
            if outcome.code == exit::SUCCESS {
                println!("{}", outcome.message);
            } else {
                eprintln!("qmem: {}", outcome.message);
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("qmem: {e}");
            e.code
        }
    };
    std::process::exit(code);
}
