#![allow(dead_code)]

use mfg_core::model::{cosine_density, Coupling, Hamiltonian, Kernel, Moment, Problem, Profile};
use mfg_core::Grid;

pub const T_END: f64 = 0.25;

pub fn problem(n: usize, nt: usize, coupling: Coupling, terminal: Coupling) -> Problem {
    let grid = Grid::one_d(n, 0.0, T_END, nt).unwrap();
    let m0 = cosine_density(&grid, 0.5, 1.0).unwrap();
    Problem::new(grid, Hamiltonian::quadratic(), coupling, terminal, m0).unwrap()
}

/// One of each catalog kind, with non-trivial strengths.
pub fn catalog() -> Vec<(Coupling, Coupling)> {
    let k = Kernel::default();
    vec![
        (Coupling::zero(), Coupling::zero()),
        (
            Coupling::static_field(std::sync::Arc::new(|x: f64| (2.0 * std::f64::consts::PI * x).sin()), 0.7),
            Coupling::zero(),
        ),
        (Coupling::convolution(k.clone(), 1.0), Coupling::convolution(k.clone(), 0.5)),
        (Coupling::efficient(k.clone(), 1.0), Coupling::zero()),
        (Coupling::potential(k.clone(), 0.5), Coupling::potential(k.clone(), 0.5)),
        (
            Coupling::xfree(Profile::Quadratic, Moment::Cos { frequency: 1.0 }, 2.0),
            Coupling::xfree(Profile::Linear, Moment::Cos { frequency: 1.0 }, 0.5),
        ),
    ]
}
