use std::process::ExitCode;

use steklov_cli::{parse_config, run, ConfigError};

fn main() -> ExitCode {
    let env_dir = std::env::var("STEKLOV_OUT_DIR").ok();
    let cfg = match parse_config(std::env::args().skip(1), env_dir.as_deref()) {
        Ok(c) => c,
        Err(ConfigError::Help(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    };
    match run(&cfg) {
        Ok(res) => {
            println!(
                "{}: sigma_{} = {:.8}, objective = {:.8}, D = {:.8}",
                cfg.mode, cfg.k, res.sigma_k, res.objective, res.diameter
            );
            if let Some(v) = &res.experiment {
                println!("{}", if v.pass { "pass" } else { "fail" });
            }
            println!("wrote {}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
