use std::io::{self, Write};

fn main() {
    sigma_mono_cli::init_logging();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match sigma_mono_cli::run(std::env::args_os(), &mut out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {f}");
            f.code
        }
    };
    let _ = out.flush();
    std::process::exit(code);
}
