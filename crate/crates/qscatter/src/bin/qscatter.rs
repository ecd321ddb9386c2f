use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use qscatter::cli::{
    cmd_canonical, cmd_check, cmd_relations, cmd_scatter, cmd_theta, deliver, error_outcome,
    Outcome, OutputFormat, RunConfig,
};
use qscatter::error::QResult;

#[derive(Parser)]
#[command(
    name = "qscatter",
    about = "q-deformed scattering diagrams, quantum broken lines and theta-function algebras"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Complete a seed diagram on the plane and check the loop identity.
    Scatter(CommonArgs),
    /// Build the canonical diagram of a seed on its surface.
    Canonical(CommonArgs),
    /// Structure constants of theta products over a charge set.
    Theta(CommonArgs),
    /// Generators-and-relations presentation of the theta algebra.
    Relations(CommonArgs),
    /// Consistency, torus grading and q-integrality checks.
    Check(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Input file, or `fixture:<name>` (pentagon, dp5, v1, v2, toric-p2,
    /// pentagon-canonical).
    #[arg(long, short)]
    input: String,
    /// Truncation order N (classes of total degree >= N are dropped).
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Comma-separated charges: `v1,v2`, `0`, or `chart:a:b` triples.
    #[arg(long)]
    charges: Option<String>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base offset for the deterministic endpoint-perturbation sequence.
    #[arg(long, default_value_t = 0)]
    retry_seed: usize,
    /// Display-only rational evaluation of coefficients at q^(1/2) = N/D,
    /// written as `N/D`.
    #[arg(long)]
    q_eval: Option<String>,
}

fn main() {
    let args = Args::parse();
    let (common, runner): (&CommonArgs, fn(&RunConfig) -> QResult<Outcome>) = match &args.command
    {
        Command::Scatter(c) => (c, cmd_scatter),
        Command::Canonical(c) => (c, cmd_canonical),
        Command::Theta(c) => (c, cmd_theta),
        Command::Relations(c) => (c, cmd_relations),
        Command::Check(c) => (c, cmd_check),
    };
    let config = RunConfig {
        input: common.input.clone(),
        order: common.order,
        charges: common.charges.clone(),
        format: match common.format {
            Format::Json => OutputFormat::Json,
            Format::Text => OutputFormat::Text,
        },
        out: common.out.clone(),
        retry_seed: common.retry_seed,
        q_eval: common.q_eval.as_ref().and_then(|s| {
            let (n, d) = s.split_once('/')?;
            Some((n.parse().ok()?, d.parse().ok()?))
        }),
    };
    let outcome = match runner(&config) {
        Ok(o) => o,
        Err(e) => error_outcome(&e),
    };
    std::process::exit(deliver(&config, &outcome));
}
