use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use krflab_cli::commands::{self, Output};
use krflab_cli::{emit_reports, RunConfig};

#[derive(Parser)]
#[command(name = "krflab", version, about = "Radial Kähler-Ricci flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON reports
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Override a config key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    print_config: bool,
    #[arg(long, global = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long = "T", global = true)]
    t_start: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// hyperbolic or quartic
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Correction terms on an η grid
    Series,
    /// Glued model profile at a few times
    Model,
    /// One evolution from v(T) = 0
    Evolve {
        /// Also write every accepted step
        #[arg(long)]
        trace: bool,
    },
    /// Single-lemma checks
    Verify {
        #[command(subcommand)]
        which: Lemma,
    },
    Theorem1,
    Theorem2,
    Corollary1,
    Stability,
}

#[derive(Subcommand, Clone, Copy)]
enum Lemma {
    Lemma1,
    Lemma2,
    Lemma3,
    Lemma4,
    Lemma6,
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        cfg.apply_file(path)?;
    }
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k, v)?;
    }
    let flags = [
        ("b", c.b.map(|x| x.to_string())),
        ("a", c.a.map(|x| x.to_string())),
        ("k", c.k.map(|x| x.to_string())),
        ("delta", c.delta.map(|x| x.to_string())),
        ("T", c.t_start.map(|x| x.to_string())),
        ("t_end", c.t_end.map(|x| x.to_string())),
        ("nodes", c.nodes.map(|x| x.to_string())),
        ("mode", c.mode.clone()),
        ("seed", c.seed.map(|x| x.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Output> {
    match command {
        Command::Series => commands::series(cfg),
        Command::Model => commands::model(cfg),
        Command::Evolve { trace } => commands::evolve(cfg, *trace),
        Command::Verify { which } => match which {
            Lemma::Lemma1 => commands::lemma1_cmd(cfg),
            Lemma::Lemma2 => commands::lemma2_cmd(cfg),
            Lemma::Lemma3 => commands::lemma3_cmd(cfg),
            Lemma::Lemma4 => commands::lemma4_cmd(cfg),
            Lemma::Lemma6 => commands::lemma6_cmd(cfg),
        },
        Command::Theorem1 => commands::theorem1(cfg).map(|(out, _, _)| out),
        Command::Theorem2 => commands::theorem2(cfg),
        Command::Corollary1 => commands::corollary1_cmd(cfg),
        Command::Stability => commands::stability(cfg),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(&cli.common)?;
    if cli.common.print_config {
        print!("{}", cfg.render());
        return Ok(true);
    }
    let (summary, tables) = dispatch(&cli.command, &cfg)?;
    let written = emit_reports(&summary, &tables, &cli.common.out)?;
    if !cli.common.quiet {
        for (flag, pass) in &summary.pass_flags {
            println!("{:<20} {}", flag, if *pass { "PASS" } else { "FAIL" });
        }
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(summary.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
