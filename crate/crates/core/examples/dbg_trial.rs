use wetlearn_core::sim::*;

fn main() {
    for scheme in [SchemeKind::Quantization, SchemeKind::Comparison] {
        let mut cfg = SimConfig::defaults();
        cfg.scheme = scheme;
        cfg.bits = BitBudget::Finite(2);
        cfg.intervals = 25;
        cfg.trials = 2;
        cfg.seed = 7;
        for trial in 0..2 {
            let out = run_trial(&cfg, trial);
            let t = out.as_learned().unwrap();
            println!(
                "{:?} trial {}: intervals={} failure={:?}",
                scheme,
                trial,
                t.intervals.len(),
                t.failure
            );
            for rec in &t.intervals {
                if !rec.truth_contained || rec.neutrality_residual > 1e-10 {
                    println!(
                        "  n={} contained={} neut={:.2e} kkt={:.2e} min_margin={:.2e} iters={}",
                        rec.interval,
                        rec.truth_contained,
                        rec.neutrality_residual,
                        rec.kkt_residual,
                        rec.min_margin,
                        rec.newton_iterations
                    );
                }
            }
        }
    }
}
