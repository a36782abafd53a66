use std::io;

fn main() {
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = locpass_cli::main_with_args(std::env::args_os(), &mut locpass_cli::Io { out: &mut out, err: &mut err });
    std::process::exit(code);
}
