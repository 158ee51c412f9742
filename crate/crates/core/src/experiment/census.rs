use std::fmt::Write as _;

use num_rational::Rational64;

use super::{ExperimentConfig, ExperimentError, Outputs, Report, RunStatus};
use crate::cones::{
    book_density, classify_2d_cone, enumerate_admissible_books, for_each_decomposition, uniqueness_gap, BoundaryConfig,
    Piece, Verdict,
};

/// Counts from an exhaustive pass over decompositions with fixed `(N0, N1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecompositionTally {
    pub enumerated: usize,
    /// Consistent with a boundary of total multiplicity at most the bound.
    pub consistent: usize,
    pub equality: usize,
    pub minimal_books: usize,
    pub inadmissible: usize,
    /// `Θ < Q/4`, or `Θ = Q/4` with a non-type-1 piece.
    pub violations: usize,
}

/// Classifies every decomposition with at most `max_slots` pieces and
/// multiplicities up to `max_mult` whose boundary has `Q <= max_q`.
pub fn tally_decompositions(n0: usize, n1: usize, max_q: u32, max_slots: usize, max_mult: u32) -> DecompositionTally {
    let mut t = DecompositionTally::default();
    for_each_decomposition(n0, n1, max_slots, max_mult, |pieces| {
        t.enumerated += 1;
        let Ok(c) = classify_2d_cone(n0, n1, pieces) else {
            return;
        };
        if c.q() > max_q {
            return;
        }
        t.consistent += 1;
        let quarter_q = Rational64::new(c.q() as i64, 4);
        let all_type1 = pieces.iter().all(|(p, _)| matches!(p, Piece::Type1 { .. }));
        if c.theta < quarter_q {
            t.violations += 1;
        }
        if c.theta == quarter_q {
            t.equality += 1;
            if !all_type1 {
                t.violations += 1;
            }
        }
        if (c.verdict == Verdict::MinimalBook) != (c.theta == quarter_q && all_type1) {
            t.violations += 1;
        }
        match c.verdict {
            Verdict::MinimalBook => t.minimal_books += 1,
            Verdict::Inadmissible => t.inadmissible += 1,
            Verdict::DensityAboveQ4 => {}
        }
    });
    t
}

/// Exhaustive census of boundary configurations, admissible books, their
/// densities, verdicts and uniqueness gaps.
pub(crate) fn run_cone_census(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<RunStatus, ExperimentError> {
    let cc = &cfg.cone_census;
    let mut report = Report::default();
    let mut csv = String::from("q,n0,n1,q0,q1,books,densities,verdicts,gap\n");
    let mut books_txt = String::new();
    let mut density_ok = true;
    let mut unique_ok = true;
    for b in BoundaryConfig::all(cc.max_q, cc.max_n) {
        let q = b.q().expect("generated configs are balanced");
        let books = enumerate_admissible_books(&b, b.n0() * b.n1());
        let mut densities = Vec::new();
        let mut verdicts = Vec::new();
        let _ = writeln!(books_txt, "config {b}");
        for c in &books {
            let d = book_density(c);
            density_ok &= d == Rational64::new(q as i64, 4);
            let pieces: Vec<(Piece, u32)> =
                c.quadrants().iter().map(|x| (Piece::Type1 { k0: x.k0, k1: x.k1 }, x.mult)).collect();
            let v = classify_2d_cone(b.n0(), b.n1(), &pieces).map_err(|e| ExperimentError::Config(e.to_string()))?;
            density_ok &= v.verdict == Verdict::MinimalBook;
            densities.push(d.to_string());
            verdicts.push(v.verdict.as_str());
            books_txt.push_str(&c.to_text());
        }
        // One piece on one side with unit multiplicities on the other has a unique book.
        if (b.n0() == 1 && b.q1.iter().all(|&x| x == 1)) || (b.n1() == 1 && b.q0.iter().all(|&x| x == 1)) {
            unique_ok &= books.len() == 1;
        }
        let gap = if cc.gaps {
            match uniqueness_gap(&b, b.n0() * b.n1()).map_err(|e| ExperimentError::Config(e.to_string()))? {
                Some(g) => format!("{g:e}"),
                None => "INF".to_string(),
            }
        } else {
            String::new()
        };
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            csv,
            "{q},{},{},{},{},{},{},{},{gap}",
            b.n0(),
            b.n1(),
            join(&b.q0),
            join(&b.q1),
            books.len(),
            densities.join(" "),
            verdicts.join(" ")
        );
    }
    out.write("census.csv", &csv)?;
    out.write("books.txt", &books_txt)?;

    let mut dec = String::from("n0,n1,enumerated,consistent,equality,minimal_books,inadmissible,violations\n");
    let mut violations = 0;
    for n0 in 1..=cc.max_n {
        for n1 in 1..=cc.max_n {
            let t = tally_decompositions(n0, n1, cc.max_q, cc.max_slots, cc.max_mult);
            violations += t.violations;
            let _ = writeln!(
                dec,
                "{n0},{n1},{},{},{},{},{},{}",
                t.enumerated, t.consistent, t.equality, t.minimal_books, t.inadmissible, t.violations
            );
        }
    }
    out.write("decompositions.csv", &dec)?;
    report.verdict("book_density_equals_q_over_4", density_ok);
    report.verdict("multiplicity_one_unique", unique_ok);
    report.line("decomposition_violations", violations);
    report.verdict("density_bound", violations == 0);
    out.check("book_density_equals_q_over_4", density_ok);
    out.check("multiplicity_one_unique", unique_ok);
    out.check("density_bound", violations == 0);
    out.write("report.txt", report.text())?;
    Ok(RunStatus::Success)
}
