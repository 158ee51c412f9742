use num_rational::Rational64;
use proptest::prelude::*;
use qlab_core::cones::{
    book_density, book_measure, classify_2d_cone, enumerate_admissible_books, standard_wedge, BoundaryConfig,
    CorneredOpenBook, Piece, Quadrant, Verdict,
};
use qlab_core::experiment::tally_decompositions;
use qlab_core::transport::strong_excess;

#[test]
fn books_have_the_prescribed_boundary() {
    for b in BoundaryConfig::all(4, 3) {
        let books = enumerate_admissible_books(&b, b.n0() * b.n1());
        assert!(!books.is_empty(), "{b}");
        for c in &books {
            assert_eq!(c.boundary(), b);
            assert_eq!(book_density(c), Rational64::new(b.q().unwrap() as i64, 4));
        }
    }
}

#[test]
fn distinct_books_for_two_by_two() {
    let b = BoundaryConfig::new(vec![1, 1], vec![1, 1]).unwrap();
    let books = enumerate_admissible_books(&b, 4);
    assert_eq!(books.len(), 2);
    assert_ne!(books[0], books[1]);
}

#[test]
fn census_has_no_violations() {
    for n0 in 1..=2 {
        for n1 in 1..=2 {
            let t = tally_decompositions(n0, n1, 3, 4, 3);
            assert_eq!(t.violations, 0, "({n0},{n1})");
            assert!(t.equality > 0);
            assert_eq!(t.equality, t.minimal_books);
        }
    }
}

#[test]
fn full_plane_is_inadmissible() {
    let c = classify_2d_cone(1, 1, &[(Piece::FullPlane, 1), (Piece::Type1 { k0: 1, k1: 1 }, 1)]);
    if let Ok(c) = c {
        assert_eq!(c.verdict, Verdict::Inadmissible);
    }
}

#[test]
fn excess_of_a_cone_with_itself_vanishes() {
    let b = BoundaryConfig::new(vec![2], vec![1, 1]).unwrap();
    let book = enumerate_admissible_books(&b, 2).remove(0);
    let c = book_measure(&book, 0.5, 1.0 / 8.0, 0.0);
    assert_eq!(strong_excess(&c, &c, &standard_wedge(1, 2), 0.5, 2).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn density_is_additive(m1 in 1u32..4, m2 in 1u32..4) {
        let q = [Quadrant { k0: 1, k1: 1, mult: m1 }, Quadrant { k0: 2, k1: 1, mult: m2 }];
        let c = CorneredOpenBook::new(2, 1, &q).unwrap();
        prop_assert_eq!(book_density(&c), Rational64::new((m1 + m2) as i64, 4));
    }
}
