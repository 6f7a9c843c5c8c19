//! Writes a synthetic toy dataset: `make_toy_dataset <dir> [videos] [seed]`.

use std::path::PathBuf;

use retcap_pipeline::config::BackendConfig;
use retcap_pipeline::toy_data::write_toy_dataset;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy_data".into()));
    let n = args.next().map_or(3, |s| s.parse().expect("video count"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    match write_toy_dataset(&dir, n, seed, &BackendConfig::default()) {
        Ok(p) => println!("{}", p.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
