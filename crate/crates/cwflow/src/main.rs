use clap::Parser;
use cwflow::{commands, Cli};

fn main() {
    let cli = Cli::parse();
    match commands::main_with(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("cwflow: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
