use std::io;

fn main() {
    let stdin = io::BufReader::new(io::stdin());
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let code = seqcheck::cli::run(std::env::args_os(), stdin, &mut stdout, &mut stderr);
    std::process::exit(code);
}
