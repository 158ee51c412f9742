use std::sync::Arc;

use qlab_core::dirichlet::{energy, minimize, MinimizeOptions, MultiField, Schedule};
use qlab_core::domains::{quarter_ball, Tag};
use qlab_core::frequency::{
    check_monotone, corner_frequency_bound, fitting_radii, frequency_profile, homogeneous_2d_solution,
};
use qlab_core::{Execution, QPoint};

fn quarter_problem(h: f64) -> MultiField {
    let mesh = Arc::new(quarter_ball(2, 1.0, h).unwrap());
    let exact = homogeneous_2d_solution(2, &[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    let mut f0 = MultiField::zero(mesh, 2, 2);
    f0.impose(&[Tag::V0, Tag::V1, Tag::CornerL], |_| QPoint::zero(2, 2));
    f0.impose(&[Tag::Lateral], |x| exact.at(x));
    f0
}

#[test]
fn parallel_and_sequential_red_black_agree_bitwise() {
    let f0 = quarter_problem(1.0 / 24.0);
    let base = MinimizeOptions { schedule: Schedule::RedBlack, max_sweeps: 200, ..Default::default() };
    let (a, ra) = minimize(&f0, &MinimizeOptions { exec: Execution::Sequential, ..base });
    let (b, rb) = minimize(&f0, &MinimizeOptions { exec: Execution::Parallel, ..base });
    assert_eq!(a.samples(), b.samples());
    assert_eq!(ra.to_csv(), rb.to_csv());
}

#[test]
fn energy_never_increases() {
    let f0 = quarter_problem(1.0 / 24.0);
    let (_, rep) = minimize(&f0, &MinimizeOptions { max_sweeps: 300, ..Default::default() });
    let e: Vec<f64> = rep.history.iter().map(|s| s.energy).collect();
    assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn schedules_reach_the_same_minimum() {
    let f0 = quarter_problem(1.0 / 24.0);
    let tight = MinimizeOptions { tol: 1e-13, ..Default::default() };
    let (a, _) = minimize(&f0, &tight);
    let (b, _) = minimize(&f0, &MinimizeOptions { schedule: Schedule::RedBlack, ..tight });
    assert!((energy(&a) - energy(&b)).abs() < 1e-8 * energy(&a));
}

#[test]
fn minimizer_frequency_is_monotone_and_above_two() {
    let f0 = quarter_problem(1.0 / 32.0);
    let (u, rep) = minimize(&f0, &MinimizeOptions { schedule: Schedule::RedBlack, ..Default::default() });
    assert!(rep.converged());
    let h = u.mesh().h();
    let radii = fitting_radii(u.mesh(), &[0.0, 0.0], 8.0 * h, 2.0 * h);
    let p = frequency_profile(&u, &[0.0, 0.0], &radii).unwrap();
    assert!(check_monotone(&p, 0.05).passed);
    assert!(corner_frequency_bound(&p).passed());
}

#[test]
fn frequency_is_invariant_under_target_rotation() {
    let mesh = Arc::new(quarter_ball(2, 1.0, 1.0 / 32.0).unwrap());
    let exact = homogeneous_2d_solution(2, &[vec![1.0, 0.5], vec![-0.25, 2.0]]).unwrap();
    let f = MultiField::from_fn(mesh.clone(), 2, 2, |x| exact.at(x)).unwrap();
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let g = f.map_values(|v| vec![c * v[0] - s * v[1], s * v[0] + c * v[1]]);
    let radii = [0.3, 0.5, 0.7];
    let (pf, pg) = (frequency_profile(&f, &[0.0, 0.0], &radii).unwrap(), frequency_profile(&g, &[0.0, 0.0], &radii).unwrap());
    for k in 0..radii.len() {
        assert!((pf.i[k].unwrap() - pg.i[k].unwrap()).abs() < 1e-9);
    }
}
