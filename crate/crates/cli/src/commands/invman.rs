//! `invman`: find a stationary point of the chosen field, split its
//! spectrum, build the Taylor model of the invariant manifold, and — for a
//! two-dimensional selected subspace — draw the reduced dynamics embedded
//! back in ambient space.

use super::Ctx;
use crate::config::FieldSource;
use crate::error::CliError;
use crate::files;
use serde::Serialize;
use std::fmt::Write as _;
use vessiot_core::field::{FnField, SymbolicField};
use vessiot_core::invman::{
    find_stationary, split_spectrum, taylor_manifold, ManifoldModel, NewtonOpts, SplitOpts,
};
use vessiot_core::poly::PolyRing;
use vessiot_core::quasilinear::project_field;
use vessiot_core::streamlines::{place_2d, svg_polylines, Streamline};
use vessiot_core::vessiot::scalar_field_exprs;

/// The serialized Taylor model: stationary point, the two basis blocks
/// (column vectors), and the graph / reduced-field coefficients indexed by
/// exponent tuples over the selected coordinates.
#[derive(Serialize)]
struct ModelFile {
    point: Vec<f64>,
    #[serde(rename = "basis_E")]
    basis_e: Vec<Vec<f64>>,
    #[serde(rename = "basis_Etilde")]
    basis_etilde: Vec<Vec<f64>>,
    degree: u32,
    h_coeffs: Vec<(Vec<u32>, Vec<f64>)>,
    g_coeffs: Vec<(Vec<u32>, Vec<f64>)>,
}

pub(super) fn load_source(ctx: &Ctx, which: FieldSource) -> Result<SymbolicField, CliError> {
    let path = ctx.equation_path();
    match which {
        FieldSource::Components => files::load_field(&path),
        FieldSource::Projected => {
            let sys = files::load_equation(&path)?;
            Ok(project_field(&sys)?)
        }
        FieldSource::Vessiot => {
            let sys = files::load_equation(&path)?;
            if sys.k() != 1 || sys.spec().m != 1 {
                return Err(CliError::Config(format!(
                    "field source \"vessiot\" needs a single scalar equation, got k={}, m={}",
                    sys.k(),
                    sys.spec().m
                )));
            }
            let exprs = scalar_field_exprs(&sys);
            Ok(SymbolicField::new(sys.spec(), exprs))
        }
    }
}

fn model_file(model: &ManifoldModel) -> ModelFile {
    let n = model.point.len();
    let p = model.split.e_dim;
    let column = |c: usize| -> Vec<f64> { (0..n).map(|r| model.split.basis[(r, c)]).collect() };
    // Exponent tuples over the selected coordinates, degree 1..=N in a
    // fixed graded order.
    let chart = PolyRing::new(p, model.degree);
    let mut h_coeffs = Vec::new();
    let mut g_coeffs = Vec::new();
    for d in 1..=model.degree {
        for idx in chart.indices_of_degree(d) {
            let exps = chart.monomial(idx).to_vec();
            let hv: Vec<f64> = (0..n - p).map(|c| model.h_coeff(c, &exps)).collect();
            let gv: Vec<f64> = (0..p).map(|c| model.g_coeff(c, &exps)).collect();
            h_coeffs.push((exps.clone(), hv));
            g_coeffs.push((exps, gv));
        }
    }
    ModelFile {
        point: model.point.clone(),
        basis_e: (0..p).map(column).collect(),
        basis_etilde: (p..n).map(column).collect(),
        degree: model.degree,
        h_coeffs,
        g_coeffs,
    }
}

pub fn run_invman(ctx: &Ctx) -> Result<String, CliError> {
    let section = ctx
        .cfg
        .invman
        .clone()
        .ok_or_else(|| CliError::Config("config has no \"invman\" section".into()))?;
    if section.degree < 1 {
        return Err(CliError::Config("invman.degree must be at least 1".into()));
    }
    let field = load_source(ctx, section.field)?;
    let n = field.spec().ambient_dim();
    if section.guess.len() != n {
        return Err(CliError::Config(format!(
            "invman.guess has {} entries but the field lives in {} dimensions",
            section.guess.len(),
            n
        )));
    }

    let guess = field.point(&section.guess);
    let stationary = find_stationary(&field, &guess, &NewtonOpts::default())?;
    let jac = field.jacobian(&stationary)?;
    let split = split_spectrum(&jac, section.selector.to_selector(), &SplitOpts::default())?;
    let model = taylor_manifold(&field, &stationary, &split, section.degree)?;

    let mut json = serde_json::to_string_pretty(&model_file(&model))
        .map_err(|e| CliError::Numeric(format!("cannot serialize model: {e}")))?;
    json.push('\n');
    let model_path = ctx.out_path("invman.json");
    files::write_output(&model_path, json.as_bytes())?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "stationary point: [{}]",
        stationary
            .coords()
            .iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        report,
        "selected subspace: dim {}, eigenvalues {}",
        split.e_dim,
        split
            .eigs_a
            .iter()
            .map(|e| format!("{:.6}{:+.6}i", e.re, e.im))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(report, "wrote {}", model_path.display());

    if let Some(mut placement) = section.portrait.clone() {
        if model.split.e_dim != 2 {
            return Err(CliError::Config(format!(
                "invman.portrait needs a 2-dimensional selected subspace, got dim {}",
                model.split.e_dim
            )));
        }
        if let Some(seed) = ctx.cfg.seed {
            placement.rng_seed = seed;
        }
        // The reduced field on chart coordinates (y₁, y₂).
        let ring = &model.ring;
        let g = &model.g;
        let reduced = FnField::new(2, |y: &[f64], out: &mut [f64]| {
            let mut full = vec![0.0; n];
            full[..2].copy_from_slice(y);
            out[0] = ring.eval(&g[0], &full);
            out[1] = ring.eval(&g[1], &full);
        });
        let chart_lines = place_2d(&reduced, &placement)?;
        let embedded: Vec<Streamline> = chart_lines
            .iter()
            .map(|l| Streamline {
                points: l.points.iter().map(|y| model.chart_point(y)).collect(),
                seed_index: l.seed_index,
                start_cause: l.start_cause,
                end_cause: l.end_cause,
                attributes: None,
            })
            .collect();

        let portrait_path = ctx.out_path("invman_portrait.json");
        files::write_output(&portrait_path, super::portrait_json(&placement, &embedded)?.as_bytes())?;
        let _ = writeln!(report, "wrote {}", portrait_path.display());

        let axes = super::check_axes(section.svg_axes, n)?;
        let (lo, hi) = super::padded_bounds_2d(embedded.iter().flat_map(|l| l.points.iter()), axes);
        let svg = svg_polylines(&embedded, axes, lo, hi, 1.0);
        let svg_path = ctx.out_path("invman_portrait.svg");
        files::write_output(&svg_path, svg.as_bytes())?;
        let _ = writeln!(
            report,
            "placed {} reduced streamlines; wrote {}",
            embedded.len(),
            svg_path.display()
        );
    }
    Ok(report)
}
