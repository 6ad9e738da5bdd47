use jumpfdt::model::{fit_gaussian_mixture, Density};
use jumpfdt::sde::{simulate_unperturbed, ModelSpec};
fn main() {
    let model = ModelSpec::double_well(0.7).unwrap();
    let t = simulate_unperturbed(&model, &[0.0], 0.01, 2_010_000, 1001)
        .unwrap()
        .skip(10_000)
        .unwrap();
    let s2 = 0.49;
    let pt = |x: f64| (-2.0 * (x.powi(4) / 4.0 - x * x / 2.0) / s2).exp();
    for (stride, it) in [(10, 200), (1, 2000)] {
        let p0 = fit_gaussian_mixture(&t, 2, stride, it).unwrap();
        if let Density::Mixture(m) = &p0 {
            for (w, c) in m.weights().iter().zip(m.components()) {
                println!("w {w:.4} m {:.4} v {:.4}", c.mean()[0], c.cov()[(0, 0)]);
            }
        }
        let (mut num, mut z) = (0.0, 0.0);
        let mut x = -4.0;
        while x < 4.0 {
            let p = pt(x);
            z += p;
            num += x * p * ((p0.ln_pdf(&[x - 0.5]) - p0.ln_pdf(&[x])).exp() - 1.0);
            x += 1e-4;
        }
        println!("stride {stride} iter {it}: lag0 with true p {:.4}", num / z);
    }
}
