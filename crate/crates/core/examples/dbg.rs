use num_complex::Complex64;
use rabi_core::gfunction::{eval_g, eval_g_general, EvalOptions};
use rabi_core::spectrum::{scan_regular, ScanTarget};
use rabi_core::{ModelParams, Parity};

fn main() {
    let p = ModelParams::new(1.0, 0.7);
    let opts = EvalOptions::default();
    // known low levels from plain scan
    let levels = scan_regular(&p, ScanTarget::Parity(Parity::Plus), 0.0, 6.0, 40, 1e-12, &opts).unwrap();
    let xs: Vec<f64> = levels.iter().map(|l| l.x).collect();
    println!("plain G+ zeros: {:?}", xs.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>());

    for &t in &[0.5, 1.0, 1.9] {
        let z0 = Complex64::new(0.0, t);
        let x0 = xs[1];
        println!("--- z0 = {t}i, around level {x0:.6}");
        for k in -3i32..=3 {
            let x = x0 + 2e-4 * k as f64;
            let v = eval_g_general(&p, Parity::Plus, x, z0, &opts).unwrap();
            println!("   x-x0 = {:+.1e}  Re = {:+.6e}  Im = {:+.6e}  (N={}, conv={})",
                x - x0, v.value.re, v.value.im, v.order_used, v.converged);
        }
    }
    // same for plain G slope scale
    let x0 = xs[1];
    for k in [-1i32, 1] {
        let x = x0 + 2e-4 * k as f64;
        let v = eval_g(&p, Parity::Plus, x, &opts).unwrap();
        println!("plain: x-x0 = {:+.1e}  G = {:+.6e}", x - x0, v.value.re);
    }
}
