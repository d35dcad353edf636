mod oracles;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, TAU};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracles::{bits, prob_oracle_1q, prob_oracle_2q, retarder, OracleReport};
use qtomo_core::optics::{
    awp, prob_1q_closed, prob_1q_direct, prob_2q_closed, prob_2q_direct, rotation_operator, settings_table,
    SettingRow2Q,
};
use qtomo_core::qstate::{bell_singlet, rho_from_t, Elements1Q, Elements2Q};
use qtomo_core::{CMat, DensityMatrix, Port, SettingRow1Q, SettingsTable, TParams, TableKind, WaveplateRow};

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    rho_from_t(&TParams::new(t).unwrap()).unwrap()
}

fn port(h: bool) -> Port {
    if h {
        Port::H
    } else {
        Port::V
    }
}

fn m2(rho: &DensityMatrix) -> [[C; 2]; 2] {
    [[rho.get(0, 0), rho.get(0, 1)], [rho.get(1, 0), rho.get(1, 1)]]
}

fn m4(rho: &DensityMatrix) -> [[C; 4]; 4] {
    let mut m = [[C::new(0.0, 0.0); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rho.get(i, j);
        }
    }
    m
}

#[test]
fn one_qubit_closed_direct_and_oracle_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: Option<OracleReport> = None;
    for case in 0..10_000 {
        let rho = random_state(&mut rng, 4);
        let row = SettingRow1Q {
            label: String::new(),
            eta_h: rng.random_range(0.0..TAU),
            eta_q: rng.random_range(0.0..TAU),
            theta_h: rng.random_range(0.0..TAU),
            theta_q: rng.random_range(0.0..TAU),
            port: port(rng.random()),
        };
        let direct = prob_1q_direct(&rho, &row).unwrap();
        let closed = prob_1q_closed(&Elements1Q::from_rho(&rho), &row.angles(), row.port);
        let oracle = prob_oracle_1q(&m2(&rho), row.eta_h, row.eta_q, row.theta_h, row.theta_q, row.port == Port::H);
        assert!((closed - direct).abs() < 1e-12, "case {case}: closed {closed} direct {direct}");
        let report = OracleReport::new(
            &format!("prob_1q/{case}"),
            &bits(&[row.eta_h, row.eta_q, row.theta_h, row.theta_q, rho.get(0, 0).re, rho.get(1, 0).re, rho.get(1, 0).im]),
            oracle,
            direct,
        );
        assert!(report.abs_err < 1e-12, "{report:?}");
        if worst.as_ref().is_none_or(|w| report.abs_err > w.abs_err) {
            worst = Some(report);
        }
    }
    worst.unwrap().store("prob_1q");
}

#[test]
fn two_qubit_closed_direct_and_oracle_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: Option<OracleReport> = None;
    for case in 0..10_000 {
        let rho = random_state(&mut rng, 16);
        // Cycle through all four port combinations.
        let (pa, pb) = (case % 2 == 0, (case / 2) % 2 == 0);
        let wa = WaveplateRow { label: String::new(), theta_h: rng.random_range(0.0..TAU), theta_q: rng.random_range(0.0..TAU), port: port(pa) };
        let wb = WaveplateRow { label: String::new(), theta_h: rng.random_range(0.0..TAU), theta_q: rng.random_range(0.0..TAU), port: port(pb) };
        let row = SettingRow2Q { a: &wa, b: &wb };
        let direct = prob_2q_direct(&rho, row).unwrap();
        let closed = prob_2q_closed(&Elements2Q::from_rho(&rho), &row.angles(), wa.port, wb.port);
        let oracle = prob_oracle_2q(&m4(&rho), (wa.theta_h, wa.theta_q), (wb.theta_h, wb.theta_q), pa, pb);
        assert!((closed - direct).abs() < 1e-10, "case {case}: closed {closed} direct {direct}");
        let report = OracleReport::new(
            &format!("prob_2q/{case}"),
            &bits(&[wa.theta_h, wa.theta_q, wb.theta_h, wb.theta_q, rho.get(1, 2).re, rho.get(3, 0).im]),
            oracle,
            direct,
        );
        assert!(report.abs_err < 1e-12, "{report:?}");
        if worst.as_ref().is_none_or(|w| report.abs_err > w.abs_err) {
            worst = Some(report);
        }
    }
    worst.unwrap().store("prob_2q");
}

/// Largest entry of `a - e^{iφ} b` over the best global phase, taken from the
/// largest entry of `b`.
fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    let (mut bi, mut bj, mut big) = (0, 0, 0.0);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if b[(i, j)].norm() > big {
                (bi, bj, big) = (i, j, b[(i, j)].norm());
            }
        }
    }
    let phase = a[(bi, bj)] / b[(bi, bj)];
    let phase = phase / phase.norm();
    a.max_abs_diff(&b.scale(phase))
}

fn apply(m: &CMat, v: [C; 2]) -> [C; 2] {
    [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]]
}

/// `|⟨a|b⟩|` for unit vectors: 1 when equal up to phase.
fn overlap(a: [C; 2], b: [C; 2]) -> f64 {
    (a[0].conj() * b[0] + a[1].conj() * b[1]).norm()
}

#[test]
fn retarders_match_oracle_and_named_relations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (eta, theta) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let o = retarder(eta, theta);
        let oracle = CMat::from_fn(2, 2, |i, j| o[i][j]);
        assert!(awp(eta, theta).max_abs_diff(&oracle) < 1e-12);
        let u = awp(eta, theta);
        assert!((&u.adjoint() * &u).max_abs_diff(&CMat::identity(2)) < 1e-12);
        let (th, tq) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
        let composed = &awp(PI, th) * &awp(FRAC_PI_2, tq);
        assert!(phase_distance(&rotation_operator(tq, th), &composed) < 1e-12);
    }
    for theta in [0.0, 0.4, 2.0] {
        assert!(phase_distance(&awp(0.0, theta), &CMat::identity(2)) < 1e-12);
    }
    let s = FRAC_1_SQRT_2;
    let h = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
    let d = [C::new(s, 0.0), C::new(s, 0.0)];
    let l = [C::new(s, 0.0), C::new(0.0, s)];
    let u = &awp(PI, FRAC_PI_8) * &awp(FRAC_PI_2, FRAC_PI_4);
    assert!((overlap(apply(&u, d), h) - 1.0).abs() < 1e-12);
    assert!((overlap(apply(&rotation_operator(FRAC_PI_4, 0.0), l), h) - 1.0).abs() < 1e-12);
    assert!((overlap(apply(&rotation_operator(0.0, 0.0), h), h) - 1.0).abs() < 1e-12);
}

#[test]
fn table_rows_and_named_probabilities() {
    let SettingsTable::One(lc) = settings_table(TableKind::LiquidCrystal) else { panic!() };
    let l = &lc[4];
    assert_eq!((l.label.as_str(), l.eta_h, l.eta_q, l.theta_h, l.theta_q, l.port), ("L", 0.0, FRAC_PI_2, FRAC_PI_8, FRAC_PI_4, Port::H));
    let SettingsTable::One(std_rows) = settings_table(TableKind::Standard) else { panic!() };
    let d = &std_rows[2];
    assert_eq!((d.label.as_str(), d.eta_h, d.eta_q, d.theta_h, d.theta_q, d.port), ("D", PI, FRAC_PI_2, FRAC_PI_8, FRAC_PI_4, Port::H));
    let SettingsTable::Two(two) = settings_table(TableKind::TwoQubit) else { panic!() };
    let r0 = two.row(0);
    assert_eq!((r0.a.theta_h, r0.a.theta_q, r0.b.theta_h, r0.b.theta_q, r0.a.port, r0.b.port), (0.0, 0.0, 0.0, 0.0, Port::H, Port::H));

    let mixed1 = DensityMatrix::new(CMat::identity(2).scale(C::new(0.5, 0.0))).unwrap();
    let hh = DensityMatrix::pure(&[C::new(1.0, 0.0), C::new(0.0, 0.0)]).unwrap();
    for row in lc.iter().chain(&std_rows) {
        assert!((prob_1q_direct(&mixed1, row).unwrap() - 0.5).abs() < 1e-12);
    }
    assert!((prob_1q_direct(&hh, &lc[0]).unwrap() - 1.0).abs() < 1e-12);
    assert!(prob_1q_direct(&hh, &lc[1]).unwrap().abs() < 1e-12);
    assert!((prob_1q_direct(&hh, &lc[2]).unwrap() - 0.5).abs() < 1e-12);

    let mixed2 = DensityMatrix::new(CMat::identity(4).scale(C::new(0.25, 0.0))).unwrap();
    let singlet = bell_singlet();
    for r in 0..36 {
        assert!((prob_2q_direct(&mixed2, two.row(r)).unwrap() - 0.25).abs() < 1e-12);
    }
    assert!(prob_2q_direct(&singlet, two.row(0)).unwrap().abs() < 1e-12);
    assert!((prob_2q_direct(&singlet, two.row(1)).unwrap() - 0.5).abs() < 1e-12);
    // Row 14 pairs D on A with D on B.
    assert_eq!(two.row(14).a.label, "D");
    assert_eq!(two.row(14).b.label, "D");
    assert!(prob_2q_direct(&singlet, two.row(14)).unwrap().abs() < 1e-12);
    let ket_hh = [C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
    let pure_hh = DensityMatrix::pure(&ket_hh).unwrap();
    let e = Elements2Q::from_rho(&pure_hh);
    assert!((prob_2q_closed(&e, &two.row(0).angles(), Port::H, Port::H) - 1.0).abs() < 1e-12);
    assert!(prob_2q_closed(&e, &two.row(6).angles(), Port::V, Port::H).abs() < 1e-12);
}
