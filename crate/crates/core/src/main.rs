use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freebound::cli::{run_file, verify, Status};
use freebound::freeboundary::{oracle_1d, oracle_radial};

#[derive(Parser)]
#[command(name = "freebound", version, about = "Minimizer and mountain-pass solutions of a free boundary problem")]
struct Args {
    /// Output directory for all artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 gives bit-reproducible runs
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ε continuation described by a configuration file
    Run { config: PathBuf },
    /// Recompute the verdicts of a finished run
    Verify { report_dir: PathBuf },
    /// Closed-form symmetric solutions on the unit interval
    Oracle1d {
        #[arg(long)]
        lambda: f64,
    },
    /// Closed-form radial solutions on a disk
    Oracleradial {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        radius: f64,
    },
}

fn write_out(args: &Args, name: &str, text: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    std::fs::File::create(args.out.join(name))?.write_all(text.as_bytes())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match dispatch(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(args: &Args) -> freebound::Result<u8> {
    match &args.command {
        Command::Run { config } => {
            let report = run_file(config, &args.out)?;
            for s in &report.stages {
                println!(
                    "eps {:<10.4e} J_eps(u0) {:<14.6} J_eps(u1) {:<14.6} converged {}/{}",
                    s.eps, s.j_eps_u0, s.j_eps_u1, s.converged_u0, s.converged_u1
                );
            }
            if let Some(v) = &report.verdicts {
                for (k, b) in v.entries() {
                    println!("verdict {k} = {b}");
                }
            }
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            println!("status {}", report.status.name());
            Ok(report.status.exit_code() as u8)
        }
        Command::Verify { report_dir } => {
            let v = verify(report_dir)?;
            for c in &v.checks {
                let mark = if c.ok { "ok" } else { "MISMATCH" };
                println!("{mark:<8} {} stored {} recomputed {}", c.name, c.stored, c.recomputed);
            }
            if v.ok() {
                println!("verified ({} checks, run status {})", v.checks.len(), v.status.name());
                Ok(0)
            } else {
                Ok(Status::Failed.exit_code() as u8)
            }
        }
        Command::Oracle1d { lambda } => {
            let o = oracle_1d(*lambda)?;
            let text = format!(
                "lambda = {}\na_stable = {}\na_unstable = {}\nenergy_stable = {}\nenergy_unstable = {}\n",
                o.lambda,
                o.a_stable,
                o.a_unstable,
                o.energy_stable(),
                o.energy_unstable()
            );
            print!("{text}");
            write_out(args, "oracle1d.txt", &text)?;
            Ok(0)
        }
        Command::Oracleradial { lambda, radius } => {
            let o = oracle_radial(*lambda, *radius)?;
            let text = format!(
                "lambda = {}\nradius = {}\nrho_stable = {}\nrho_unstable = {}\nenergy_stable = {}\nenergy_unstable = {}\n",
                o.lambda,
                o.radius,
                o.rho_stable,
                o.rho_unstable,
                o.energy_stable(),
                o.energy_unstable()
            );
            print!("{text}");
            write_out(args, "oracleradial.txt", &text)?;
            Ok(0)
        }
    }
}
