//! Runs the variant ladder on the default configuration and prints one line
//! per seed plus the seed-averaged steps.
//!
//! ```text
//! cargo run --release -p collrec-core --example ladder [config.toml] [seeds]
//! ```

use std::time::Instant;

use collrec_core::pipeline::{run_ladder_with, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => PipelineConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = args.next() {
        cfg.eval.ladder_seeds = n.parse()?;
    }
    let start = Instant::now();
    let report = run_ladder_with(&cfg, |run| {
        let acc: Vec<String> = run
            .evals
            .iter()
            .map(|e| format!("{}={:.4}", e.model_id, e.pairwise_accuracy))
            .collect();
        let lifts: Vec<String> = run.ab.iter().map(|a| format!("{:+.4}", a.ccr_lift)).collect();
        println!(
            "seed {} [{:.0?}] pairs {}/{} oracle={:.4} {} lifts {} ccr0={:.4}",
            run.seed,
            start.elapsed(),
            run.train_pairs,
            run.test_pairs,
            run.oracle.pairwise_accuracy,
            acc.join(" "),
            lifts.join(" "),
            run.ab[0].ccr_control,
        );
    })?;
    for s in &report.averaged.steps {
        println!(
            "{:>12} -> {:<12} offline {:+6.2} pts  lift {:+7.3}%",
            s.control,
            s.variant,
            s.offline_diff_points,
            100.0 * s.ccr_lift
        );
    }
    println!(
        "rank correlation {:?}, signs agree {}",
        report.averaged.rank_correlation, report.averaged.signs_agree
    );
    Ok(())
}
