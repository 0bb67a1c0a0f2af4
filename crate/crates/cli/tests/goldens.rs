use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use nzgate::golden::GoldenManifest;
use nzgate::hilbert::{DressedBasis, HamiltonianTerms};
use nzgate::params::DIM;
use nzgate::pulse::{gate_schedule, Schedule};
use nzgate::schema::{self, Table};
use nzgate::BareLabel;
use nzgate_cli::goldens::{golden_scenario, verify_goldens};

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

#[test]
fn committed_goldens_reproduce() {
    let report = verify_goldens(&dir(), &[]).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn one_percent_coupling_change_is_caught() {
    let sc = golden_scenario(&dir(), &GoldenManifest::load(&dir()).unwrap()).unwrap();
    // zz-map sweeps g_12 itself, so its axis is scaled along with the base value.
    let axis = &sc.axes("zz-map")[0];
    assert_eq!(axis.path, "system.g_12");
    let tweak = [("system.g_12".to_string(), sc.system.g_12 * 1.01), ("sweeps.zz-map.0.stop".to_string(), axis.stop * 1.01)];
    let report = verify_goldens(&dir(), &tweak).unwrap();
    for file in ["zz-map.csv", "spectrum.csv", "overlap-scan.csv"] {
        let f = report.files.iter().find(|f| f.file == file).unwrap();
        assert!(!f.passed(), "{f}");
    }
}

/// Hamiltonian at time `t` from linear interpolation of the samples.
fn hamiltonian(terms: &HamiltonianTerms, s: &Schedule, t: f64) -> nalgebra::DMatrix<f64> {
    let x = (t / s.dt).clamp(0.0, s.intervals() as f64);
    let k = (x.floor() as usize).min(s.intervals() - 1);
    let f = x - k as f64;
    let (w0, g0) = s.sample(k);
    let (w1, g1) = s.sample(k + 1);
    let lerp = |a: [f64; 3], b: [f64; 3]| [0, 1, 2].map(|i| a[i] + f * (b[i] - a[i]));
    terms.matrix(lerp(w0, w1), lerp(g0, g1))
}

/// Classical fourth-order Runge-Kutta on i dpsi/dt = 2 pi H psi, in the
/// interaction picture of the idle diagonal to keep the step stable.
fn rk4(terms: &HamiltonianTerms, s: &Schedule, psi: DVector<Complex64>, substeps: usize) -> DVector<Complex64> {
    let tau = 2.0 * std::f64::consts::PI;
    let (w, g) = s.sample(0);
    let e = terms.matrix(w, g).diagonal();
    let h = s.dt / substeps as f64;
    let n = s.intervals() * substeps;
    let rhs = |t: f64, v: &DVector<Complex64>| -> DVector<Complex64> {
        let mut m = hamiltonian(terms, s, t);
        for j in 0..DIM {
            m[(j, j)] -= e[j];
        }
        let hi = nalgebra::DMatrix::from_fn(DIM, DIM, |j, k| Complex64::from_polar(m[(j, k)], tau * (e[j] - e[k]) * t));
        (hi * v) * Complex64::new(0.0, -tau)
    };
    let mut psi = psi;
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + h / 2.0, &(&psi + &k1 * Complex64::from(h / 2.0)));
        let k3 = rhs(t + h / 2.0, &(&psi + &k2 * Complex64::from(h / 2.0)));
        let k4 = rhs(t + h, &(&psi + &k3 * Complex64::from(h)));
        psi += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(h / 6.0);
    }
    let t = n as f64 * h;
    DVector::from_fn(DIM, |j, _| psi[j] * Complex64::from_polar(1.0, -tau * e[j] * t))
}

#[test]
fn leakage_golden_matches_runge_kutta() {
    let sc = golden_scenario(&dir(), &GoldenManifest::load(&dir()).unwrap()).unwrap();
    let table = Table::read_csv(schema::LEAKAGE, &std::fs::read_to_string(dir().join("leakage.csv")).unwrap()).unwrap();
    let row = table.rows.iter().position(|r| r[0] == "20").unwrap();
    let col = |name: &str| table.numbers(name).unwrap()[row];

    let sys = sc.for_command("leakage").unwrap().idle_system().unwrap();
    let mut gp = sc.gate.clone();
    gp.t_p = 20.0;
    gp.v = col("v");
    gp.coupler_on_freq = col("coupler_on_freq");
    gp.coupler_inset = col("coupler_inset");
    let s = gate_schedule(&sys, &gp).unwrap();
    let basis = DressedBasis::new(&sys);
    let terms = HamiltonianTerms::new(&sys);
    let start = basis.vector(BareLabel::new(1, 0, 1)).column(0).into_owned();
    let end = rk4(&terms, &s, start, 32);
    assert!((end.norm() - 1.0).abs() < 1e-6);
    let pop = |l: BareLabel| (basis.vector(l).adjoint() * &end)[(0, 0)].norm_sqr();
    let leak = pop(BareLabel::new(1, 1, 0)) + pop(BareLabel::new(0, 1, 1));
    let expected = col("p_110_011");
    assert!((leak - expected).abs() < 0.02 * expected, "RK4 {leak:e} vs golden {expected:e}");
    // Linear against cubic interpolation of the samples shows up at this level.
    let partner = pop(gp.exchange_partner(&sys));
    assert!((partner - col("p_partner")).abs() < 5e-8, "RK4 {partner:e} vs golden {:e}", col("p_partner"));
}
