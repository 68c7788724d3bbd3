use tasep_core::kpz::*;
use std::time::Instant;

fn main() {
    let fi = ScalingFrame { t: 1.0, x: 0.3, a: 0.0, u: 0.1, v: 0.0 };
    let fj = ScalingFrame { t: 1.0, x: 0.0, a: 0.0, u: -0.2, v: 0.0 };
    for model in [Model::Bernoulli { p: 0.5 }, Model::Geometric { alpha: 0.5 }] {
        println!("--- {model:?}");
        for eps in [0.1, 0.05, 0.025, 0.0125] {
            let t0 = Instant::now();
            let row = pair_comparison(model, eps, &fi, &fj).unwrap();
            println!("eps={eps}: err_q={:.3e} err_klim={:.3e}  ({:.1?})", row.err_q, row.err_klim, t0.elapsed());
        }
    }
}
