use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    encfm::cli::run_with_args(std::env::args_os(), &mut out)
}
