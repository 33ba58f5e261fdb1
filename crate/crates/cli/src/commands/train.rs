use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;

use sdr_core::training::{self, Checkpoint, LossRecord, TrainError, TrainObserver};

use crate::common::{ensure_dir, io_error, read_config, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct TrainArgs {
    /// JSON config (problem.*, network.*, train.*, eval.*).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for checkpoint.json, loss_history.csv, manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Additionally write checkpoint.json every N iterations (0 = end only).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
}

/// Streams log records into loss_history.csv and refreshes checkpoint.json
/// at the configured cadence.
struct StreamingObserver {
    csv: BufWriter<File>,
    checkpoint_path: PathBuf,
    quiet: bool,
}

impl TrainObserver for StreamingObserver {
    fn on_log(&mut self, record: &LossRecord) {
        let rel = record.rel_l2_error.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(self.csv, "{},{},{},{}", record.iteration, record.loss, record.lr, rel);
        if !self.quiet {
            match record.rel_l2_error {
                Some(e) => eprintln!(
                    "iter {:>8}  loss {:>14.6e}  lr {:.1e}  rel_l2 {:.4e}",
                    record.iteration, record.loss, record.lr, e
                ),
                None => eprintln!(
                    "iter {:>8}  loss {:>14.6e}  lr {:.1e}",
                    record.iteration, record.loss, record.lr
                ),
            }
        }
    }

    fn on_periodic_checkpoint(&mut self, checkpoint: &Checkpoint) {
        let _ = checkpoint.save(&self.checkpoint_path);
    }
}

pub fn run(args: TrainArgs) -> CliResult {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    ensure_dir(&args.out)?;
    let checkpoint_path = args.out.join("checkpoint.json");
    let csv_path = args.out.join("loss_history.csv");
    let manifest_path = args.out.join("manifest.json");

    let mut manifest = RunManifest::new("train", cfg.train.seed);
    manifest.config = Some(cfg.clone());

    let problem = cfg
        .build_problem()
        .map_err(|e| CliError::Usage(format!("config problem: {e}")))?;

    let csv = File::create(&csv_path)
        .map_err(|e| io_error(&format!("creating {}", csv_path.display()), e))?;
    let mut observer = StreamingObserver {
        csv: BufWriter::new(csv),
        checkpoint_path: checkpoint_path.clone(),
        quiet: std::env::var_os("SDR_QUIET").is_some(),
    };
    observer
        .csv
        .write_all(b"iteration,loss,lr,rel_l2_error\n")
        .map_err(|e| io_error("writing loss history header", e))?;

    let outcome = training::train_with(&problem, &cfg, args.checkpoint_every, &mut observer);
    observer.csv.flush().map_err(|e| io_error("flushing loss history", e))?;
    drop(observer);

    let outputs = vec![
        "checkpoint.json".to_string(),
        "loss_history.csv".to_string(),
        "manifest.json".to_string(),
    ];
    match outcome {
        Ok(output) => {
            output
                .checkpoint
                .save(&checkpoint_path)
                .map_err(|e| io_error("writing checkpoint", e))?;
            // Rewrite the CSV from the full history so the file is identical
            // to the in-memory record even if streaming was interrupted.
            crate::common::write_atomic(&csv_path, &output.history.to_csv())?;
            manifest.finish("ok", outputs);
            manifest.write(&manifest_path)?;
            let last = output.history.records.last();
            println!(
                "trained {} iterations; final loss {}; checkpoint {}",
                output.checkpoint.iteration,
                last.map(|r| r.loss.to_string()).unwrap_or_else(|| "n/a".into()),
                checkpoint_path.display()
            );
            if let Some(rel) = last.and_then(|r| r.rel_l2_error) {
                println!("final rel_l2_error {rel}");
            }
            Ok(())
        }
        Err(TrainError::Invalid(e)) => Err(CliError::Usage(format!("invalid config: {e}"))),
        Err(TrainError::Aborted { iteration, source, last_good, history }) => {
            last_good
                .save(&checkpoint_path)
                .map_err(|e| io_error("writing last good checkpoint", e))?;
            crate::common::write_atomic(&csv_path, &history.to_csv())?;
            manifest.finish("aborted", outputs);
            manifest.write(&manifest_path)?;
            Err(CliError::Numerical(format!(
                "aborted at iteration {iteration}: {source}; last good state saved to {}",
                checkpoint_path.display()
            )))
        }
    }
}
