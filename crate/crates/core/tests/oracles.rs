//! Closed-form values, frozen.

use fockbridge::algebra::{parse_poly, quantize_canonical, quantize_normal, Generator};
use fockbridge::equivalence::{compare_trajectories, CompareConfig};
use fockbridge::fock::{coherent_vector, density_matrix, expectation, poisson_tail, realize, Ensemble, FockSpace, PhasePoint};
use fockbridge::lattice::{dispersion, LatticeSpec};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn phi_squared_canonical() {
    let q = quantize_canonical(&parse_poly("phi1^2").unwrap()).unwrap();
    let (a, ad) = (Generator::a(1), Generator::a_dag(1));
    assert_eq!(q.coefficient(&[]), c(0.25, 0.0));
    assert_eq!(q.coefficient(&[a, a]), c(0.25, 0.0));
    assert_eq!(q.coefficient(&[ad, a]), c(0.5, 0.0));
    assert_eq!(q.coefficient(&[ad, ad]), c(0.25, 0.0));
    assert_eq!(q.len(), 4);
}

#[test]
fn pi_squared_canonical() {
    let q = quantize_canonical(&parse_poly("pi1^2").unwrap()).unwrap();
    let (a, ad) = (Generator::a(1), Generator::a_dag(1));
    assert_eq!(q.coefficient(&[]), c(0.25, 0.0));
    assert_eq!(q.coefficient(&[a, a]), c(-0.25, 0.0));
    assert_eq!(q.coefficient(&[ad, a]), c(0.5, 0.0));
    assert_eq!(q.coefficient(&[ad, ad]), c(-0.25, 0.0));
}

#[test]
fn normal_form_drops_the_constant() {
    let q = quantize_normal(&parse_poly("phi1^2 + pi1^2").unwrap()).unwrap();
    assert_eq!(q.len(), 1);
    assert_eq!(q.coefficient(&[Generator::a_dag(1), Generator::a(1)]), c(1.0, 0.0));
}

#[test]
fn coherent_component() {
    let space = FockSpace::new(1, 30).unwrap();
    let w = coherent_vector(space, &PhasePoint::new(vec![0.5], vec![0.3]).unwrap()).unwrap();
    let got = w.component(&[2]);
    assert!((got - c(0.09544977805820926, 0.17896833385914235)).norm() < 1e-15);
}

#[test]
fn traces_of_phi_squared() {
    let space = FockSpace::new(1, 30).unwrap();
    let rho = density_matrix(space, &Ensemble::point(PhasePoint::new(vec![0.6], vec![0.2]).unwrap())).unwrap();
    let f = parse_poly("phi1^2").unwrap();
    let normal = expectation(&rho, &realize(space, &quantize_normal(&f).unwrap()).unwrap()).unwrap();
    let canonical = expectation(&rho, &realize(space, &quantize_canonical(&f).unwrap()).unwrap()).unwrap();
    assert!((normal - c(0.36, 0.0)).norm() < 1e-12);
    assert!((canonical - c(0.61, 0.0)).norm() < 1e-12);
}

#[test]
fn poisson_tails() {
    assert!((poisson_tail(1.0, 3) / 0.018_988_156_876_153_81 - 1.0).abs() < 1e-12);
    assert!((poisson_tail(2.0, 10) / 8.308_224_368_484_213e-6 - 1.0).abs() < 1e-12);
    assert_eq!(poisson_tail(0.0, 3), 0.0);
}

#[test]
fn harmonic_mean_at_unit_time() {
    let cfg = CompareConfig {
        hamiltonian: parse_poly("0.5*pi1^2 + 0.5*phi1^2").unwrap(),
        ensemble: Ensemble::point(PhasePoint::new(vec![0.8], vec![0.3]).unwrap()),
        cutoff: 20,
        dt: 1e-3,
        t_max: 1.0,
        sample_every: 1000,
        max_derivative_order: 0,
        seed: None,
    };
    let r = compare_trajectories(&cfg).unwrap();
    assert_eq!(r.times.len(), 2);
    let want = 0.6846831401368807;
    assert!((r.quantum[0].phi[1] - want).abs() < 1e-9, "{}", r.quantum[0].phi[1]);
    assert!((r.classical[0].phi[1] - want).abs() < 1e-9);
}

#[test]
fn three_site_dispersion() {
    let spec = LatticeSpec::new(1, 3, 1.0, vec![1.0]).unwrap();
    let table = dispersion(&spec);
    assert!((table.max() - 2.3208814801554607).abs() < 1e-14);
    assert!((spec.momentum_cell() - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
    assert_eq!(spec.volume(), 3.0);
}
