//! `qha <kind> --config <path> [--out <dir>] [--resolution N] [--quiet]`
//!
//! Exit codes: 0 ok, 2 invalid config/usage, 3 numerical guard, 4 I/O.
//! `QHA_THREADS` caps worker threads.

use qha::runner::{self, Config, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

fn usage() -> String {
    let kinds = runner::config::KINDS.join(" | ");
    format!(
        "usage: qha <kind> --config <path> [--out <dir>] [--resolution N] [--quiet]\n\
         kinds: {kinds}\n\
         env:   QHA_THREADS caps parallelism"
    )
}

fn parse_args(args: &[String]) -> Result<(String, PathBuf, Overrides), String> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        return Err(usage());
    }
    let kind = args[0].clone();
    let mut config: Option<PathBuf> = None;
    let mut ov = Overrides::default();
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--config" => {
                i += 1;
                config = Some(PathBuf::from(args.get(i).ok_or("--config needs a path")?));
            }
            "--out" => {
                i += 1;
                ov.out_dir = Some(PathBuf::from(args.get(i).ok_or("--out needs a path")?));
            }
            "--resolution" => {
                i += 1;
                let n: usize = args
                    .get(i)
                    .ok_or("--resolution needs a number")?
                    .parse()
                    .map_err(|_| "--resolution needs a number".to_string())?;
                if n == 0 || !n.is_power_of_two() {
                    return Err(format!("--resolution must be a power of two, got {n}"));
                }
                ov.resolution = Some(n);
            }
            "--quiet" => ov.quiet = true,
            other => return Err(format!("unknown argument `{other}`\n{}", usage())),
        }
        i += 1;
    }
    let config = config.ok_or_else(|| format!("missing --config\n{}", usage()))?;
    Ok((kind, config, ov))
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("QHA_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (kind, config_path, ov) = match parse_args(&args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let cfg = match Config::from_file(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("qha: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cfg.kind != kind {
        eprintln!(
            "qha: config kind `{}` does not match the requested kind `{kind}`",
            cfg.kind
        );
        return ExitCode::from(2);
    }
    match runner::run(&cfg, &ov) {
        Ok(manifest) => {
            if !ov.quiet {
                println!(
                    "ok: {} files in {}",
                    manifest.files.len(),
                    ov.out_dir
                        .as_deref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_else(|| cfg.output_dir.clone().unwrap_or_else(|| "out".into()))
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qha: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
