use wetlearn_core::accpm::{CenterOptions, CuttingPlane, WorkingSet};
use wetlearn_core::hermitian::HermitianMatrix;
use wetlearn_core::rng::SplitMix64;
use num_complex::Complex64;

fn random_hermitian(dim: usize, rng: &mut SplitMix64) -> HermitianMatrix {
    HermitianMatrix::from_upper_fn(dim, |a, b| {
        if a == b {
            Complex64::new(rng.standard_normal(), 0.0)
        } else {
            rng.complex_standard_normal()
        }
    })
}

fn main() {
    let mut rng = SplitMix64::new(3);
    let mut ws = WorkingSet::initial(4).unwrap();
    // a handful of random planes with margins guaranteed at I/4
    let mut planes = vec![];
    for i in 0..6 {
        let sigma = random_hermitian(4, &mut rng);
        let at_center = sigma.inner(ws.center()).unwrap();
        planes.push(CuttingPlane::new(sigma, at_center + 0.3, 2 + i, 1));
    }
    ws.add_planes(planes).unwrap();
    let report = ws.recenter(&CenterOptions::default());
    match report {
        Ok(r) => println!("OK iters={} kkt={:.3e}", r.newton_iterations, r.kkt_residual),
        Err(e) => println!("ERR {e:?}"),
    }
    // deep-cut stress: plane violated at the current center
    let sigma = random_hermitian(4, &mut rng);
    let at_center = sigma.inner(ws.center()).unwrap();
    let mut ws2 = ws;
    ws2.add_planes(vec![CuttingPlane::new(sigma, at_center - 0.05, 9, 1)]).unwrap();
    match ws2.recenter(&CenterOptions::default()) {
        Ok(r) => println!("deep OK iters={} kkt={:.3e} margin={:.3e}", r.newton_iterations, r.kkt_residual, ws2.min_margin_at(ws2.center())),
        Err(e) => println!("deep ERR {e:?}"),
    }
}
