use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, ExperimentError, ExperimentKind, Outputs, Report, RunStatus};
use crate::dirichlet::{energy, minimize, MultiField};
use crate::domains::{quarter_ball, Tag};
use crate::frequency::{
    check_monotone, corner_frequency_bound, fitting_radii, frequency_profile, height_decay_check, homogeneous_2d_solution,
    CornerBound, RELIABLE_FACTOR,
};
use crate::qpoints::{g_distance, QPoint};

/// Radius at which the headline frequency value is reported.
const PROBE_RADIUS: f64 = 0.5;

/// Solves the quarter-ball problem with zero data on the walls and
/// `Σ v_i sin(kθ) r^k` on the lateral band, then runs the frequency checks at
/// the corner.
pub(crate) fn run_quarter_frequency(cfg: &ExperimentConfig, oracle: bool, out: &mut Outputs) -> Result<RunStatus, ExperimentError> {
    let qc = &cfg.quarter_frequency;
    let h = cfg.h(ExperimentKind::QuarterFrequency);
    let mesh = Arc::new(quarter_ball(qc.m, qc.radius, h).map_err(|e| ExperimentError::Config(e.to_string()))?);
    let zero_data = qc.sheets.is_empty();
    let (q, n) = if zero_data { (2, 1) } else { (qc.sheets.len(), qc.sheets[0].len()) };
    let exact = if zero_data {
        None
    } else {
        Some(homogeneous_2d_solution(qc.degree, &qc.sheets).map_err(|e| ExperimentError::Config(e.to_string()))?)
    };
    let sample = |x: &[f64]| exact.as_ref().map_or_else(|| QPoint::zero(q, n), |s| s.at(x));

    let mut report = Report::default();
    report.line("mesh", format!("quarter_ball m={} r={} h={h}", qc.m, qc.radius));
    report.line("vertices", mesh.num_vertices());
    report.line("oracle_mode", oracle);
    let mut status = RunStatus::Success;
    let field = if oracle {
        MultiField::from_fn(mesh.clone(), q, n, sample).expect("consistent shapes")
    } else {
        let mut f0 = MultiField::zero(mesh.clone(), q, n);
        f0.impose(&[Tag::V0, Tag::V1, Tag::CornerL], |_| QPoint::zero(q, n));
        f0.impose(&[Tag::Lateral], sample);
        let (f, rep) = minimize(&f0, &cfg.solver.options());
        out.write("convergence.csv", &rep.to_csv())?;
        report.line("sweeps", rep.history.len());
        report.line("converged", rep.converged());
        if !rep.converged() {
            status = RunStatus::NotConverged;
        }
        f
    };
    report.line("energy", format!("{:e}", energy(&field)));
    if let Some(s) = &exact {
        let sup = (0..mesh.num_vertices())
            .map(|v| g_distance(field.sample(v), &s.at(mesh.point(v))).expect("same shape"))
            .fold(0.0, f64::max);
        report.line("sup_error_vs_homogeneous", format!("{sup:e}"));
    }

    let center = vec![0.0; qc.m];
    let radii = fitting_radii(&mesh, &center, RELIABLE_FACTOR * h, 2.0 * h);
    if radii.is_empty() {
        return Err(ExperimentError::Config(format!("h = {h} leaves no reliable radius in the quarter ball")));
    }
    let profile = frequency_profile(&field, &center, &radii).map_err(|e| ExperimentError::Config(e.to_string()))?;
    out.write("frequency.csv", &profile.to_csv())?;
    report.line("degenerate", profile.degenerate);
    if let Ok(p) = frequency_profile(&field, &center, &[PROBE_RADIUS]) {
        match p.i[0] {
            Some(i) => report.line("I_at_0.5", format!("{i:.6}")),
            None => report.line("I_at_0.5", "undefined"),
        }
    }
    let mono = check_monotone(&profile, qc.monotone_slack);
    report.line("monotone_worst_violation", format!("{:e}", mono.worst_violation));
    report.verdict("monotone", mono.passed);
    out.check("monotone", mono.passed);
    match corner_frequency_bound(&profile) {
        CornerBound::Inconclusive => report.line("corner_bound", "INCONCLUSIVE"),
        b => {
            report.line("corner_plateau", format!("{:.6}", b.plateau().expect("conclusive")));
            report.verdict("corner_bound", b.passed());
            out.check("corner_bound", b.passed());
            let alpha = b.plateau().expect("conclusive");
            let hd = height_decay_check(&field, &center, alpha).map_err(|e| ExperimentError::Config(e.to_string()))?;
            report.verdict("height_decay", hd.passed);
            out.check("height_decay", hd.passed);
        }
    }

    // A non-minimizing field whose sheets oscillate radially must fail the check.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let omega = rng.gen_range(10.0..20.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = MultiField::from_fn(mesh.clone(), q, n, |x| {
        let s = (omega * x.iter().map(|c| c * c).sum::<f64>().sqrt() + phase).sin();
        let sheets: Vec<Vec<f64>> =
            (0..q).map(|i| dir.iter().map(|d| if i % 2 == 0 { s * d } else { -s * d }).collect()).collect();
        QPoint::from_sheets(&sheets).expect("shape")
    })
    .expect("consistent shapes");
    if let Ok(p) = frequency_profile(&noise, &center, &radii) {
        let guard = check_monotone(&p, qc.monotone_slack);
        report.line("oscillating_field_worst_violation", format!("{:e}", guard.worst_violation));
        report.verdict("monotone_guard_fails", !guard.passed);
        out.check("monotone_guard_fails", !guard.passed);
    }
    out.write("report.txt", report.text())?;
    Ok(status)
}
