use std::sync::Arc;

use super::{ExperimentConfig, ExperimentError, ExperimentKind, Outputs, Report, RunStatus};
use crate::dirichlet::{energy, minimize, MultiField, Trace};
use crate::domains::{cylinder, Tag};
use crate::frequency::{check_monotone, fitting_radii, frequency_profile, height_decay_check, plateau, RELIABLE_FACTOR};
use crate::qpoints::QPoint;
use crate::topology::{default_s_min, extract_normal_map, locate_essential_singularity, ForcedStatus};

/// Minimizes the two-valued energy on the cylinder with the square-root
/// trace on the lateral side and top and zero on the bottom, extracts the
/// normal map at the bottom and locates the sheet collisions its boundary
/// monodromy forces.
pub(crate) fn run_cylinder_singularity(cfg: &ExperimentConfig, oracle: bool, out: &mut Outputs) -> Result<RunStatus, ExperimentError> {
    let h = cfg.h(ExperimentKind::CylinderSingularity);
    let mesh = Arc::new(cylinder(h).map_err(|e| ExperimentError::Config(e.to_string()))?);
    let trace = Trace::SqrtCylinder;
    let mut report = Report::default();
    report.line("mesh", format!("cylinder h={h}"));
    report.line("vertices", mesh.num_vertices());
    report.line("oracle_mode", oracle);
    let mut status = RunStatus::Success;
    let u = if oracle {
        MultiField::from_fn(mesh.clone(), 2, 2, |x| trace.eval(x)).expect("consistent shapes")
    } else {
        let mut f0 = MultiField::zero(mesh.clone(), 2, 2);
        f0.impose(&[Tag::Bottom], |_| QPoint::zero(2, 2));
        f0.impose(&[Tag::Lateral, Tag::Top], |x| trace.eval(x));
        let (u, rep) = minimize(&f0, &cfg.solver.options());
        out.write("convergence.csv", &rep.to_csv())?;
        report.line("sweeps", rep.history.len());
        report.line("converged", rep.converged());
        if !rep.converged() {
            status = RunStatus::NotConverged;
        }
        u
    };
    report.line("energy", format!("{:e}", energy(&u)));

    // Frequency at the bottom centre.
    let center = [0.0, 0.0, 0.0];
    let radii = fitting_radii(&mesh, &center, RELIABLE_FACTOR * h, h);
    if !radii.is_empty() {
        let p = frequency_profile(&u, &center, &radii).map_err(|e| ExperimentError::Config(e.to_string()))?;
        out.write("frequency.csv", &p.to_csv())?;
        let mono = check_monotone(&p, cfg.quarter_frequency.monotone_slack);
        report.line("monotone_worst_violation", format!("{:e}", mono.worst_violation));
        report.verdict("monotone", mono.passed);
        out.check("monotone", mono.passed);
        if let Some(alpha) = plateau(&p) {
            report.line("bottom_frequency", format!("{alpha:.6}"));
            let hd = height_decay_check(&u, &center, alpha).map_err(|e| ExperimentError::Config(e.to_string()))?;
            report.verdict("height_decay", hd.passed);
            out.check("height_decay", hd.passed);
        }
    }

    let eta = extract_normal_map(&u).map_err(|e| ExperimentError::Config(e.to_string()))?;
    out.write("normal_map.txt", &eta.to_text())?;
    let configured = cfg.cylinder_singularity.s_min;
    let s_min = if configured > 0.0 { Some(configured) } else { default_s_min(&eta) };
    let Some(s_min) = s_min else {
        report.line("status", "NOT_FORCED");
        report.line("reason", "no separation threshold certifies the matchings");
        out.check("boundary_transposition", false);
        out.write("report.txt", report.text())?;
        return Ok(status);
    };
    match locate_essential_singularity(&eta, s_min) {
        Ok(sing) => {
            out.write("singularity.txt", &sing.to_text(eta.mesh()))?;
            let transposition = sing.boundary_monodromy.is_transposition();
            report.line("s_min", format!("{s_min:e}"));
            report.line("boundary_monodromy", &sing.boundary_monodromy);
            report.verdict("boundary_transposition", transposition);
            out.check("boundary_transposition", transposition);
            let forced = sing.status == ForcedStatus::Forced && !sing.components.is_empty();
            report.line("forced_components", sing.components.len());
            report.verdict("forced_component", forced);
            out.check("forced_component", forced);
            let origin = eta.mesh().vertex_at([0, 0, 0]).expect("disk contains its centre");
            let at_origin = sing.components.iter().any(|c| c.contains_vertex(origin));
            report.line("component_contains_origin", at_origin);
            if oracle {
                out.check("component_contains_origin", at_origin);
            }
        }
        Err(e) => {
            report.line("status", "NOT_FORCED");
            report.line("reason", e);
            out.check("boundary_transposition", false);
        }
    }
    out.write("report.txt", report.text())?;
    Ok(status)
}
