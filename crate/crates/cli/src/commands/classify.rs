//! `classify`: sweep a grid in the jet chart, classify every node, and
//! write a CSV table.

use super::Ctx;
use crate::config::SweepAxis;
use crate::error::CliError;
use crate::files;
use rayon::prelude::*;
use std::fmt::Write as _;
use vessiot_core::jet::JetPoint;
use vessiot_core::vessiot::{classify, project_to_manifold, ClassifyOpts, PointClass, ProjectOpts};

fn class_token(c: PointClass) -> &'static str {
    match c {
        PointClass::Regular => "regular",
        PointClass::RegularSingular => "regular_singular",
        PointClass::IrregularSingular => "irregular_singular",
    }
}

fn linspace(axis: &SweepAxis) -> Vec<f64> {
    if axis.count == 0 {
        return Vec::new();
    }
    if axis.count == 1 {
        return vec![axis.min];
    }
    let step = (axis.max - axis.min) / (axis.count - 1) as f64;
    (0..axis.count).map(|i| axis.min + step * i as f64).collect()
}

pub fn run_classify(ctx: &Ctx) -> Result<String, CliError> {
    let sys = files::load_equation(&ctx.equation_path())?;
    let spec = sys.spec();
    let n = spec.ambient_dim();
    let section = ctx
        .cfg
        .classify
        .clone()
        .ok_or_else(|| CliError::Config("config has no \"classify\" section".into()))?;

    let base = if section.base.is_empty() {
        vec![0.0; n]
    } else if section.base.len() == n {
        section.base.clone()
    } else {
        return Err(CliError::Config(format!(
            "classify.base has {} entries but the chart has {} coordinates",
            section.base.len(),
            n
        )));
    };

    let names: Vec<String> = files::coord_names(spec);
    let mut axes: Vec<(usize, Vec<f64>)> = Vec::new();
    for ax in &section.sweep {
        let idx = names.iter().position(|v| *v == ax.var).ok_or_else(|| {
            CliError::Config(format!(
                "classify.sweep: unknown coordinate {:?} (expected one of {})",
                ax.var,
                names.join(", ")
            ))
        })?;
        if axes.iter().any(|(i, _)| *i == idx) {
            return Err(CliError::Config(format!(
                "classify.sweep: coordinate {:?} listed twice",
                ax.var
            )));
        }
        axes.push((idx, linspace(ax)));
    }

    // Cartesian product, last axis fastest, for a deterministic row order.
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut nodes: Vec<Vec<f64>> = Vec::with_capacity(total);
    for flat in 0..total {
        let mut coords = base.clone();
        let mut rest = flat;
        for (idx, values) in axes.iter().rev() {
            coords[*idx] = values[rest % values.len()];
            rest /= values.len();
        }
        nodes.push(coords);
    }

    let project = section.project;
    let copts = ClassifyOpts::default();
    let popts = ProjectOpts::default();
    let pool = super::thread_pool()?;
    let rows: Vec<Option<(Vec<f64>, vessiot_core::vessiot::Classification)>> = pool.install(|| {
        nodes
            .par_iter()
            .map(|coords| {
                let mut p = JetPoint::new(spec, coords.clone());
                if project {
                    match project_to_manifold(&sys, &p, &popts) {
                        Ok(q) => p = q,
                        Err(e) => {
                            log::warn!("classify: projection failed at {coords:?}: {e}");
                            return None;
                        }
                    }
                }
                match classify(&sys, &p, &copts) {
                    Ok(c) => Some((p.coords().to_vec(), c)),
                    Err(e) => {
                        log::warn!("classify: classification failed at {coords:?}: {e}");
                        None
                    }
                }
            })
            .collect()
    });

    let mut csv = String::new();
    csv.push_str(&names.join(","));
    csv.push_str(",class,rank_full,rank_b\n");
    let mut counts = [0usize; 3];
    let mut failed = 0usize;
    for row in &rows {
        match row {
            Some((coords, c)) => {
                for x in coords {
                    let _ = write!(csv, "{x},");
                }
                let _ = writeln!(csv, "{},{},{}", class_token(c.class), c.rank_ab, c.rank_b);
                counts[match c.class {
                    PointClass::Regular => 0,
                    PointClass::RegularSingular => 1,
                    PointClass::IrregularSingular => 2,
                }] += 1;
            }
            None => failed += 1,
        }
    }

    let csv_path = ctx.out_path("classify.csv");
    files::write_output(&csv_path, csv.as_bytes())?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "classified {} of {} grid nodes ({} regular, {} regular singular, {} irregular singular, {} failed)",
        total - failed,
        total,
        counts[0],
        counts[1],
        counts[2],
        failed
    );
    let _ = writeln!(report, "wrote {}", csv_path.display());
    Ok(report)
}
