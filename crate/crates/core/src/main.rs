//! Command-line experiment runner.

use clap::Parser;
use obstacle_diffusion::error::Error;
use obstacle_diffusion::experiments::{run_experiment, table1_sweep, ExperimentConfig};
use obstacle_diffusion::scheme::DtPolicy;
use obstacle_diffusion::switch::SwitchVariant;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "odiff",
    about = "Switched degenerate-diffusion solver and obstacle-problem benchmarks"
)]
struct Cli {
    /// Catalog test to run: 1..10 with an optional variant letter (e.g. 4b)
    #[arg(long, value_parser = parse_test, required_unless_present = "table1")]
    test: Option<(u8, char)>,

    /// Switch function: `exact` or `eta:<n>`
    #[arg(long, default_value = "exact", value_parser = parse_switch)]
    switch: SwitchVariant,

    /// Time-step policy: fixed | adaptive | halving
    #[arg(long, default_value = "fixed", value_parser = parse_policy)]
    policy: DtPolicy,

    /// Step ratio dt/h^2 (default 37.5 in 1D, 10 in 2D)
    #[arg(long)]
    gamma: Option<f64>,

    /// Total nodes per axis
    #[arg(long, default_value_t = 101)]
    nodes: usize,

    /// Stationarity tolerance
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,

    /// Time horizon
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,

    /// Also run the obstacle-problem reference solver over the same steps
    #[arg(long)]
    compare: bool,

    /// Output directory for CSV artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Run the 12-row performance sweep instead of a single test
    #[arg(long)]
    table1: bool,
}

fn parse_test(s: &str) -> Result<(u8, char), String> {
    let (digits, letter): (String, String) = s.chars().partition(|c| c.is_ascii_digit());
    let id: u8 = digits
        .parse()
        .map_err(|_| format!("bad test id in '{s}'"))?;
    let variant = match letter.as_str() {
        "" => 'a',
        v if v.len() == 1 => v.chars().next().unwrap(),
        _ => return Err(format!("bad variant in '{s}'")),
    };
    Ok((id, variant))
}

fn parse_switch(s: &str) -> Result<SwitchVariant, String> {
    if s == "exact" {
        return Ok(SwitchVariant::Exact);
    }
    if let Some(n) = s.strip_prefix("eta:") {
        let n: u32 = n.parse().map_err(|_| format!("bad eta parameter '{n}'"))?;
        if n < 1 {
            return Err("eta parameter must be >= 1".into());
        }
        return Ok(SwitchVariant::Smoothed { n });
    }
    Err(format!("unknown switch '{s}' (use exact or eta:<n>)"))
}

fn parse_policy(s: &str) -> Result<DtPolicy, String> {
    match s {
        "fixed" => Ok(DtPolicy::Fixed),
        "adaptive" => Ok(DtPolicy::adaptive()),
        "halving" => Ok(DtPolicy::halving()),
        _ => Err(format!("unknown policy '{s}'")),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if cli.table1 {
        let (csv, rows) = table1_sweep()?;
        std::fs::create_dir_all(&cli.out)?;
        std::fs::write(cli.out.join("table1.csv"), &csv)?;
        println!("switch  policy    gamma    T*      iters  C_bound  sup_distance  ref_solves");
        for r in &rows {
            println!(
                "{:<7} {:<9} {:<8} {:<7.4} {:<6} {:<8.4} {:<13.3e} {}",
                r.switch.to_string(),
                r.policy.name(),
                r.gamma,
                r.t_star,
                r.iterations,
                r.c_bound,
                r.sup_distance,
                r.reference_solves,
            );
        }
        println!("wrote {}", cli.out.join("table1.csv").display());
        return Ok(());
    }

    let (test, variant) = cli.test.expect("clap enforces --test without --table1");
    let cfg = ExperimentConfig {
        test,
        variant,
        switch: cli.switch,
        policy: cli.policy,
        gamma: cli.gamma,
        nodes: cli.nodes,
        tol: cli.tol,
        t_max: cli.tmax,
        compare: cli.compare,
        out: Some(cli.out.clone()),
    };
    let outcome = run_experiment(&cfg)?;
    println!("{}", outcome.summary);
    println!("artifacts under {}", cli.out.display());
    Ok(())
}
