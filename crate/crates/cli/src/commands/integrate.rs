//! `integrate`: trace one generalized solution from a starting point and
//! write it as JSONL + CSV (+ optional SVG projection).

use super::Ctx;
use crate::error::CliError;
use crate::files;
use serde::Serialize;
use std::fmt::Write as _;
use vessiot_core::integrate::{integrate_generalized, Bounds, IntegrateOpts, StopReason, Trajectory};
use vessiot_core::jet::JetPoint;
use vessiot_core::streamlines::svg_polylines;
use vessiot_core::vessiot::{project_to_manifold, ProjectOpts};

/// One JSONL record: arclength, ambient point, ambient direction.
#[derive(Serialize)]
struct TrajRecord<'a> {
    s: f64,
    point: &'a [f64],
    direction: Vec<f64>,
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::MaxSteps => "max_steps",
        StopReason::Boundary => "boundary",
        StopReason::NearSingularity => "near_singularity",
        StopReason::NoConvergence => "no_convergence",
    }
}

fn write_outputs(ctx: &Ctx, traj: &Trajectory, section_svg: bool, axes: [usize; 2]) -> Result<Vec<String>, CliError> {
    let spec = traj.points[0].spec();
    let names = files::coord_names(spec);
    let mut written = Vec::new();

    let mut jsonl = String::new();
    for i in 0..traj.points.len() {
        let rec = TrajRecord {
            s: traj.arclength[i],
            point: traj.points[i].coords(),
            direction: traj.directions[i].ambient(&traj.points[i]),
        };
        let line = serde_json::to_string(&rec)
            .map_err(|e| CliError::Numeric(format!("cannot serialize trajectory: {e}")))?;
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    let jsonl_path = ctx.out_path("trajectory.jsonl");
    files::write_output(&jsonl_path, jsonl.as_bytes())?;
    written.push(jsonl_path.display().to_string());

    let mut csv = String::from("s,");
    csv.push_str(&names.join(","));
    csv.push('\n');
    for i in 0..traj.points.len() {
        let _ = write!(csv, "{}", traj.arclength[i]);
        for x in traj.points[i].coords() {
            let _ = write!(csv, ",{x}");
        }
        csv.push('\n');
    }
    let csv_path = ctx.out_path("trajectory.csv");
    files::write_output(&csv_path, csv.as_bytes())?;
    written.push(csv_path.display().to_string());

    if section_svg {
        let axes = super::check_axes(axes, spec.ambient_dim())?;
        let pts: Vec<Vec<f64>> = traj.points.iter().map(|p| p.coords().to_vec()).collect();
        let (lo, hi) = super::padded_bounds_2d(pts.iter(), axes);
        let line = vessiot_core::streamlines::Streamline {
            points: pts,
            seed_index: 0,
            start_cause: vessiot_core::streamlines::StopCause::Stalled,
            end_cause: vessiot_core::streamlines::StopCause::Stalled,
            attributes: None,
        };
        let svg = svg_polylines(std::slice::from_ref(&line), axes, lo, hi, 1.0);
        let svg_path = ctx.out_path("trajectory.svg");
        files::write_output(&svg_path, svg.as_bytes())?;
        written.push(svg_path.display().to_string());
    }
    Ok(written)
}

pub fn run_integrate(ctx: &Ctx) -> Result<String, CliError> {
    let sys = files::load_equation(&ctx.equation_path())?;
    let spec = sys.spec();
    let n = spec.ambient_dim();
    let section = ctx
        .cfg
        .integrate
        .clone()
        .ok_or_else(|| CliError::Config("config has no \"integrate\" section".into()))?;

    if section.start.len() != n {
        return Err(CliError::Config(format!(
            "integrate.start has {} entries but the chart has {} coordinates",
            section.start.len(),
            n
        )));
    }
    if section.h <= 0.0 {
        return Err(CliError::Config("integrate.h must be positive".into()));
    }
    let bounds = match &section.bounds {
        None => None,
        Some(b) => {
            if b.lo.len() != n || b.hi.len() != n {
                return Err(CliError::Config(format!(
                    "integrate.bounds must have {n} entries per corner"
                )));
            }
            Some(Bounds {
                lo: b.lo.clone(),
                hi: b.hi.clone(),
            })
        }
    };
    let mut stop_near = Vec::new();
    for p in &section.stop_points {
        if p.len() != n {
            return Err(CliError::Config(format!(
                "integrate.stop_points entries must have {n} coordinates"
            )));
        }
        stop_near.push(JetPoint::new(spec, p.clone()));
    }

    let raw_start = JetPoint::new(spec, section.start.clone());
    let start = project_to_manifold(&sys, &raw_start, &ProjectOpts::default())?;

    let opts = IntegrateOpts {
        h: section.h,
        max_steps: section.max_steps,
        bounds,
        stop_near,
        stop_radius: section.stop_radius,
        ..IntegrateOpts::default()
    };
    let traj = integrate_generalized(&sys, &start, None, &opts)?;

    let written = write_outputs(ctx, &traj, section.svg, section.svg_axes)?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "integrated {} points, arclength {:.6}, stop: {}",
        traj.points.len(),
        traj.arclength.last().copied().unwrap_or(0.0),
        stop_name(traj.stop)
    );
    for f in &written {
        let _ = writeln!(report, "wrote {f}");
    }
    if traj.stop == StopReason::NoConvergence {
        return Err(CliError::Numeric(format!(
            "direction continuation stopped converging after {} points; partial outputs kept in {}",
            traj.points.len(),
            ctx.out.display()
        )));
    }
    Ok(report)
}
