use wetlearn_core::accpm::{CenterOptions, WorkingSet};
use wetlearn_core::channel::generate_channel;
use wetlearn_core::channel::ChannelParams;
use wetlearn_core::rng::SplitMix64;
use wetlearn_core::schemes::*;

fn main() {
    let mut params = ChannelParams::defaults(0);
    params.rng_seed = SplitMix64::substream(7, &[0, 0]).next_u64();
    let real = generate_channel(&params);
    let truth = &real.normalized_gram;
    let power = 1.0;
    let tm = 2.0;
    let mut design_rng = SplitMix64::substream(7, &[0, 1]);
    let mut ws = WorkingSet::initial(4).unwrap();
    let mut cov = TrainingCovariance::isotropic(power, 4);
    let mut reference = 0.0;
    let opts = CenterOptions::default();
    for n in 1..=8 {
        let energy = tm * real.gram.inner(&cov.matrix).unwrap();
        if n == 1 { reference = energy; }
        let q_bar: f64 = energy / reference;
        if n >= 2 {
            let word = quantize(q_bar, 2);
            let planes = quantization_planes(&word, &cov, 4, power, n);
            println!("n={n} q_bar={q_bar:.6} word={word:?}");
            for p in &planes {
                println!("   plane idx={} value_at_truth={:+.3e} value_at_center={:+.3e}",
                    p.index, p.value_at(truth).unwrap(), p.value_at(ws.center()).unwrap());
            }
            ws.add_planes(planes).unwrap();
            match ws.recenter(&opts) {
                Ok(r) => println!("   recenter OK iters={} kkt={:.2e} min_margin={:.2e} err={:.4}",
                    r.newton_iterations, r.kkt_residual, ws.min_margin_at(ws.center()),
                    ws.center().frobenius_distance(truth)),
                Err(e) => { println!("   recenter ERR {e:?}"); 
                    let margins = ws.margins_at(ws.center());
                    println!("   margins at warm center: {:?}", margins);
                    let margins_truth = ws.margins_at(truth);
                    println!("   margins at truth: {:?}", margins_truth);
                    break; }
            }
        }
        cov = design_quantization_covariance(ws.center(), power, &mut design_rng).unwrap();
    }
}
