#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use roundcount_cli::Cli;

// NUL-separated argv; only parsing is exercised, never execution.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("roundcount").chain(s.split('\0'));
    let _ = Cli::try_parse_from(args);
});
