//! `portrait`: evenly-spaced streamline placement in a plane, on an
//! equation surface, or in a volume, with JSON + SVG outputs.

use super::Ctx;
use crate::config::PortraitMode;
use crate::error::CliError;
use crate::files;
use std::fmt::Write as _;
use vessiot_core::field::VectorField;
use vessiot_core::streamlines::{
    depth_attributes, place_2_5d, place_2d, place_3d, svg_polylines, Camera, Streamline,
};

fn default_camera(lo: &[f64], hi: &[f64]) -> Camera {
    // Look at the region center from beyond its upper corner.
    let center: Vec<f64> = (0..3).map(|i| 0.5 * (lo[i] + hi[i])).collect();
    let span: Vec<f64> = (0..3).map(|i| hi[i] - lo[i]).collect();
    let position = [
        hi[0] + 0.75 * span[0],
        hi[1] + 0.75 * span[1],
        hi[2] + 0.75 * span[2],
    ];
    let view = [
        center[0] - position[0],
        center[1] - position[1],
        center[2] - position[2],
    ];
    Camera {
        position,
        view,
        min_width: 0.5,
        max_width: 2.0,
    }
}

pub fn run_portrait(ctx: &Ctx) -> Result<String, CliError> {
    let section = ctx
        .cfg
        .portrait
        .clone()
        .ok_or_else(|| CliError::Config("config has no \"portrait\" section".into()))?;
    let mut placement = section.placement.clone();
    if let Some(seed) = ctx.cfg.seed {
        placement.rng_seed = seed;
    }
    if let Some(path) = &section.singular_points_file {
        let extra = files::load_point_list(&ctx.resolve(path))?;
        placement.singular_points.extend(extra);
    }

    let dim_needed = match section.mode {
        PortraitMode::Planar => 2,
        PortraitMode::Surface => 3,
        PortraitMode::Volume => 3,
    };

    let mut lines: Vec<Streamline> = match section.mode {
        PortraitMode::Surface => {
            let sys = files::load_equation(&ctx.equation_path())?;
            place_2_5d(&sys, &placement)?
        }
        PortraitMode::Planar | PortraitMode::Volume => {
            let field = super::invman::load_source(ctx, section.field)?;
            if field.dim() != dim_needed {
                return Err(CliError::Config(format!(
                    "portrait mode needs a {dim_needed}-dimensional field, got {}",
                    field.dim()
                )));
            }
            match section.mode {
                PortraitMode::Planar => place_2d(&field, &placement)?,
                _ => place_3d(&field, &placement)?,
            }
        }
    };

    if section.mode == PortraitMode::Volume {
        let camera = section
            .camera
            .clone()
            .unwrap_or_else(|| default_camera(&placement.lo, &placement.hi));
        depth_attributes(&mut lines, &camera);
    }

    let json_path = ctx.out_path("portrait.json");
    files::write_output(&json_path, super::portrait_json(&placement, &lines)?.as_bytes())?;

    let samples: usize = lines.iter().map(Streamline::len).sum();
    let mut report = String::new();
    let _ = writeln!(
        report,
        "placed {} streamlines ({} samples)",
        lines.len(),
        samples
    );
    let _ = writeln!(report, "wrote {}", json_path.display());

    if section.mode != PortraitMode::Volume {
        let axes = super::check_axes(section.svg_axes, placement.lo.len())?;
        // The SVG viewport is the configured plotting region, not the data
        // bounding box.
        let lo = (placement.lo[axes.0], placement.lo[axes.1]);
        let hi = (placement.hi[axes.0], placement.hi[axes.1]);
        let svg = svg_polylines(&lines, axes, lo, hi, 1.0);
        let svg_path = ctx.out_path("portrait.svg");
        files::write_output(&svg_path, svg.as_bytes())?;
        let _ = writeln!(report, "wrote {}", svg_path.display());
    }
    Ok(report)
}
