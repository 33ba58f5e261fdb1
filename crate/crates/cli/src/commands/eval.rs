use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use sdr_core::evaluation::{relative_l2_error_field, EvalReport};
use sdr_core::sampling::{stream_id, RngStream};

use crate::common::{checkpoint_problem_and_field, load_checkpoint, write_atomic, CliError, CliResult};

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Monte-Carlo test samples.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the evaluation seed (default: checkpoint seed).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    format_version: u32,
    checkpoint: String,
    seed: u64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

pub fn run(args: EvalArgs) -> CliResult {
    let cp = load_checkpoint(&args.checkpoint)?;
    let (problem, field) = checkpoint_problem_and_field(&cp)?;
    let seed = args.seed.unwrap_or(cp.seed);
    let mut rng = RngStream::new(seed, stream_id::EVAL);
    let report = relative_l2_error_field(&problem, field.as_field().as_ref(), args.samples, &mut rng)
        .map_err(|e| CliError::Numerical(format!("evaluation failed: {e}")))?;
    println!(
        "problem {}  samples {}  rel_l2_error {}  (num {} +- {}, den {} +- {})",
        report.problem_id,
        report.n_samples,
        report.rel_l2_error,
        report.numerator,
        report.numerator_std_error,
        report.denominator,
        report.denominator_std_error
    );
    if let Some(out) = &args.out {
        let file = ReportFile {
            format_version: 1,
            checkpoint: args.checkpoint.display().to_string(),
            seed,
            report: &report,
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| crate::common::io_error("serializing report", e))?;
        write_atomic(out, &json)?;
    }
    Ok(())
}
