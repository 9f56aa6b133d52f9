use clap::Parser;

fn main() {
    let cli = match attnsr::pipeline::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; keep their conventional exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match attnsr::pipeline::run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(attnsr::pipeline::exit_code(&e));
        }
    }
}
