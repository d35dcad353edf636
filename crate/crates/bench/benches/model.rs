use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qtomo_bench::{one_qubit_config, two_qubit_config};
use qtomo_core::optics::{prob_2q_closed, Angles2Q};
use qtomo_core::qstate::elements_2q;
use qtomo_core::{Port, TomographyModel};

fn probabilities(c: &mut Criterion) {
    let t: Vec<f64> = (0..16).map(|k| 0.1 + 0.05 * k as f64).collect();
    let e = elements_2q(&t);
    let ang = Angles2Q { theta_h_a: 0.3, theta_q_a: 0.7, theta_h_b: 0.1, theta_q_b: 0.4 };
    c.bench_function("prob_2q_closed", |b| b.iter(|| prob_2q_closed(black_box(&e), black_box(&ang), Port::H, Port::V)));
}

fn gradients(c: &mut Criterion) {
    for (name, cfg) in [("grad_1q", one_qubit_config()), ("grad_2q", two_qubit_config())] {
        let model = TomographyModel::new(cfg).expect("valid config");
        let dim = model.layout().dim();
        let x: Vec<f64> = (0..dim).map(|k| if k < 16 { 0.2 } else { 0.1 * (k % 3) as f64 }).collect();
        c.bench_function(name, |b| b.iter(|| model.value_and_grad(black_box(&x))));
    }
}

criterion_group!(benches, probabilities, gradients);
criterion_main!(benches);
