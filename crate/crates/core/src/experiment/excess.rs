use std::fmt::Write as _;

use super::{ExperimentConfig, ExperimentError, Outputs, Report, RunStatus};
use crate::cones::{book_measure, enumerate_admissible_books, standard_wedge, BoundaryConfig};
use crate::transport::strong_excess;

/// Tabulates `𝔼(T, C, B_r)` at `r = 1, ρ, ρ², …` for a book `C` and its
/// graph perturbation `T` of size `λ`, and the ratios of consecutive levels.
pub(crate) fn run_excess_decay(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<RunStatus, ExperimentError> {
    let ec = &cfg.excess_decay;
    let b = BoundaryConfig::new(ec.q0.clone(), ec.q1.clone()).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let books = enumerate_admissible_books(&b, b.n0() * b.n1());
    let Some(book) = books.first() else {
        return Err(ExperimentError::Config(format!("no admissible book for {b}")));
    };
    let wedge = standard_wedge(b.n0(), b.n1());
    let mut report = Report::default();
    report.line("boundary", &b);
    report.line("book", book);
    report.line("lambda", ec.lambda);
    let claim = ec.lambda <= ec.small_excess_limit;
    if !claim {
        report.line("flag", "NO_DECAY_CLAIM");
    }
    let mut csv = String::from("level,r,excess,ratio\n");
    let mut prev: Option<f64> = None;
    let mut decays = true;
    for level in 0..ec.levels {
        let r = ec.rho.powi(level as i32);
        let c = book_measure(book, r, ec.resolution, 0.0);
        let t = book_measure(book, r, ec.resolution, ec.lambda);
        let e = strong_excess(&t, &c, &wedge, r, 2).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let ratio = prev.filter(|p| *p > 0.0).map(|p| e / p);
        if let Some(q) = ratio {
            decays &= q < 1.0;
        }
        let _ = writeln!(csv, "{level},{r:e},{e:e},{}", ratio.map(|q| format!("{q:e}")).unwrap_or_default());
        prev = Some(e);
    }
    out.write("excess.csv", &csv)?;
    if claim {
        report.verdict("decay", decays);
        out.check("decay", decays);
    }
    out.write("report.txt", report.text())?;
    Ok(RunStatus::Success)
}
