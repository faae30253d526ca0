use std::io::IsTerminal;

fn main() {
    let color = std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    let code = fgalgebra::cli::run(std::env::args_os(), &mut stdout, &mut stderr, color);
    std::process::exit(code);
}
