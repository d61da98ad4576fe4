use std::time::Instant;
use wetlearn_core::sim::*;

fn summarize(name: &str, cfg: &SimConfig, grid: &[usize]) {
    let t0 = Instant::now();
    let outputs = run_trials(cfg, 0).unwrap();
    let agg = aggregate(&outputs, grid).unwrap();
    let failures: usize = outputs
        .iter()
        .filter_map(|o| o.as_learned())
        .filter(|t| t.failure.is_some())
        .count();
    let violations: usize = outputs
        .iter()
        .filter_map(|o| o.as_learned())
        .map(|t| t.intervals.iter().filter(|r| !r.truth_contained).count())
        .sum();
    let max_kkt = outputs
        .iter()
        .filter_map(|o| o.as_learned())
        .flat_map(|t| t.intervals.iter().map(|r| r.kkt_residual))
        .fold(0.0f64, f64::max);
    println!("== {name}: {:?} failures={failures} violations={violations} max_kkt={max_kkt:.2e}", t0.elapsed());
    for row in &agg.rows {
        if row.metric == Metric::NormError || row.metric == Metric::GainDb {
            println!("  N={:3} {:10} mean={:.4e} stderr={:.2e} ({} trials)",
                row.intervals, row.metric.as_str(), row.mean, row.stderr, row.trials_used);
        }
        if row.metric == Metric::ChiStarDb && row.intervals == *grid.last().unwrap() {
            println!("  chi*_db mean={:.4}", row.mean);
        }
    }
}

fn main() {
    let base = SimConfig::defaults();

    // criterion 3 regime: B=4, long runs
    for scheme in [SchemeKind::Quantization, SchemeKind::Comparison] {
        let mut cfg = base.clone();
        cfg.scheme = scheme;
        cfg.bits = BitBudget::Finite(4);
        cfg.intervals = 150;
        cfg.trials = 12;
        cfg.seed = 11;
        summarize(&format!("{:?} B=4 N=150", scheme), &cfg, &[20, 60, 150]);
    }

    // criterion 2 regime: B=2, N=60
    for scheme in [SchemeKind::Quantization, SchemeKind::Comparison] {
        let mut cfg = base.clone();
        cfg.scheme = scheme;
        cfg.bits = BitBudget::Finite(2);
        cfg.intervals = 60;
        cfg.trials = 12;
        cfg.seed = 3;
        summarize(&format!("{:?} B=2 N=60", scheme), &cfg, &[60]);
    }

    // criterion 9: pruning
    let mut cfg = base.clone();
    cfg.bits = BitBudget::Finite(2);
    cfg.intervals = 100;
    cfg.trials = 8;
    cfg.seed = 5;
    summarize("Quant B=2 N=100 unpruned", &cfg, &[100]);
    cfg.prune_keep = Some(32);
    summarize("Quant B=2 N=100 keep=32", &cfg, &[100]);

    // criterion 10: robust mode
    let mut cfg = base.clone();
    cfg.bits = BitBudget::Finite(2);
    cfg.intervals = 100;
    cfg.trials = 8;
    cfg.seed = 9;
    cfg.alpha = 0.01;
    cfg.robust = true;
    for scheme in [SchemeKind::Quantization, SchemeKind::Comparison] {
        cfg.scheme = scheme;
        summarize(&format!("{:?} robust alpha=0.01", scheme), &cfg, &[100]);
    }
    cfg.robust = false;
    cfg.scheme = SchemeKind::Comparison;
    summarize("Comparison NON-robust alpha=0.01", &cfg, &[100]);

    // random beam baseline
    let mut cfg = base.clone();
    cfg.scheme = SchemeKind::RandomBeam;
    cfg.intervals = 60;
    cfg.trials = 12;
    cfg.seed = 3;
    summarize("RandomBeam N=60", &cfg, &[60]);

    // infinite-B
    let mut cfg = base.clone();
    cfg.bits = BitBudget::Infinite;
    cfg.intervals = 16;
    cfg.trials = 12;
    cfg.seed = 1;
    summarize("Quant B=inf N=16", &cfg, &[8, 16]);
}
