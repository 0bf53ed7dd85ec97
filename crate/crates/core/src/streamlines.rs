//! Evenly-spaced streamline placement in three geometries: planar fields,
//! direction fields on an implicitly defined surface in three-dimensional
//! space, and free three-dimensional fields.
//!
//! Placement follows the classic evenly-spaced strategy: grow a first
//! streamline from a user seed, derive candidate seeds at distance `d_sep`
//! orthogonally to every committed sample, and keep growing lines from
//! admissible candidates until none remain. A line under construction stops
//! when it leaves the region, comes within `d_test` of an already committed
//! sample (or of its own distant past), or comes within `d_s` of a listed
//! singular point. All distances are ambient Euclidean distances answered by
//! a uniform-grid spatial index.

use crate::expr::EquationSystem;
use crate::field::VectorField;
use crate::integrate::{self, IntegrateOpts};
use crate::jet::JetPoint;
use crate::vessiot::{self, ClassifyOpts, ContinuationOpts, Direction, PointClass, ProjectOpts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

/// Failures of streamline placement.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamlineError {
    #[error("invalid placement parameters: {0}")]
    InvalidParams(String),
    #[error("no streamline could be started from the initial seed")]
    EmptyResult,
}

/// Why a streamline end stopped growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    /// Clipped by the plotting region.
    Boundary,
    /// Came within `d_test` of an existing sample.
    Proximity,
    /// Came within `d_s` of a singular point.
    Singularity,
    /// The underlying field or direction could not be continued.
    Stalled,
    /// Hit the per-line sample cap.
    MaxLength,
}

impl StopCause {
    /// Whether this end was clipped by the region boundary (as opposed to
    /// ending openly inside it).
    pub fn is_clipped(self) -> bool {
        matches!(self, StopCause::Boundary)
    }
}

/// Placement parameters shared by all geometries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementParams {
    /// Desired spacing between neighbouring streamlines; also the candidate
    /// seed offset and the spatial-index cell size.
    pub d_sep: f64,
    /// Minimal spacing: growth stops when a line gets closer than this to
    /// existing samples.
    pub d_test: f64,
    /// Exclusion radius around the listed singular points.
    #[serde(default)]
    pub d_s: f64,
    /// Integrator step (ambient arclength).
    pub h: f64,
    /// Lower corner of the axis-aligned plotting region.
    pub lo: Vec<f64>,
    /// Upper corner of the plotting region.
    pub hi: Vec<f64>,
    /// Seed of the first streamline.
    pub seed: Vec<f64>,
    /// Points (or densely sampled curves) to keep the distance `d_s` from.
    #[serde(default)]
    pub singular_points: Vec<Vec<f64>>,
    /// Seed of the reproducible candidate-pick generator.
    #[serde(default)]
    pub rng_seed: u64,
    /// Per-line sample cap guaranteeing termination.
    #[serde(default = "default_max_line_samples")]
    pub max_line_samples: usize,
}

fn default_max_line_samples() -> usize {
    100_000
}

impl PlacementParams {
    /// Parameters with the invariant-respecting defaults `h = d_test / 2`,
    /// no singular points, PRNG seed 0.
    pub fn new(d_sep: f64, d_test: f64, lo: Vec<f64>, hi: Vec<f64>, seed: Vec<f64>) -> Self {
        PlacementParams {
            d_sep,
            d_test,
            d_s: 0.0,
            h: d_test / 2.0,
            lo,
            hi,
            seed,
            singular_points: Vec::new(),
            rng_seed: 0,
            max_line_samples: default_max_line_samples(),
        }
    }

    fn validate(&self, dim: usize) -> Result<(), StreamlineError> {
        let fail = |m: &str| Err(StreamlineError::InvalidParams(m.to_string()));
        if !(self.d_test > 0.0 && self.d_test < self.d_sep) {
            return fail("spacing must satisfy 0 < d_test < d_sep");
        }
        if !(self.d_s >= 0.0) {
            return fail("d_s must be non-negative");
        }
        if !(self.h > 0.0 && self.h <= self.d_test) {
            return fail("step must satisfy 0 < h <= d_test");
        }
        if self.lo.len() != dim || self.hi.len() != dim || self.seed.len() != dim {
            return fail("region corners and seed must match the field dimension");
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b)) {
            return fail("region must have positive extent in every axis");
        }
        if self.singular_points.iter().any(|p| p.len() != dim) {
            return fail("singular points must match the field dimension");
        }
        Ok(())
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v >= a && v <= b)
    }

    fn near_singular(&self, x: &[f64]) -> bool {
        self.d_s > 0.0
            && self
                .singular_points
                .iter()
                .any(|s| euclid(s, x) < self.d_s)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One placed streamline: thinned sample points in trace order (backward
/// end first), the index of the original seed sample, a stop cause per end,
/// and optional per-sample depth attributes `(color, alpha, width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streamline {
    pub points: Vec<Vec<f64>>,
    pub seed_index: usize,
    pub start_cause: StopCause,
    pub end_cause: StopCause,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<[f64; 3]>>,
}

impl Streamline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Spatial index.
// ---------------------------------------------------------------------------

/// Uniform-grid point index with cell size equal to the query radius bound:
/// any point within a radius not exceeding the cell size of a query point
/// lies in the 3^dim cell neighbourhood.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    cell: f64,
    points: Vec<Vec<f64>>,
    grid: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialIndex {
    pub fn new(dim: usize, cell: f64) -> Self {
        assert!((1..=3).contains(&dim));
        assert!(cell > 0.0);
        SpatialIndex {
            dim,
            cell,
            points: Vec::new(),
            grid: HashMap::new(),
        }
    }

    fn key(&self, x: &[f64]) -> [i64; 3] {
        let mut k = [0i64; 3];
        for i in 0..self.dim {
            k[i] = (x[i] / self.cell).floor() as i64;
        }
        k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn insert(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        let id = self.points.len();
        let key = self.key(x);
        self.points.push(x.to_vec());
        self.grid.entry(key).or_default().push(id);
    }

    /// Indices of stored points within `r` of `x` (strict), in insertion
    /// order within each visited cell. Requires `r <= cell`.
    pub fn neighbors_within(&self, x: &[f64], r: f64) -> Vec<usize> {
        debug_assert!(r <= self.cell * (1.0 + 1e-12));
        let center = self.key(x);
        let mut out = Vec::new();
        let ranges = |i: usize| -> std::ops::RangeInclusive<i64> {
            if i < self.dim {
                center[i] - 1..=center[i] + 1
            } else {
                0..=0
            }
        };
        for a in ranges(0) {
            for b in ranges(1) {
                for c in ranges(2) {
                    if let Some(ids) = self.grid.get(&[a, b, c]) {
                        for &id in ids {
                            if euclid(&self.points[id], x) < r {
                                out.push(id);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Whether any stored point lies strictly within `r` of `x`.
    pub fn any_within(&self, x: &[f64], r: f64) -> bool {
        !self.neighbors_within(x, r).is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.points[id]
    }
}

// ---------------------------------------------------------------------------
// Geometry-specific tracing.
// ---------------------------------------------------------------------------

/// What a geometry must provide: seed admission (projection onto the
/// admissible set), raw unit-arclength stepping, and the candidate-seed
/// frame around a sample.
trait RawTracer {
    fn dim(&self) -> usize;
    /// Project a candidate onto the admissible set; `None` drops it.
    fn admit_seed(&mut self, candidate: &[f64]) -> Option<Vec<f64>>;
    /// Prepare a semitrajectory from an admitted seed; returns the unit
    /// tangent along the trace direction, or `None` if no trace can start.
    fn begin(&mut self, seed: &[f64], forward: bool) -> Option<Vec<f64>>;
    /// Advance one raw step; `Err` carries the internal stop cause.
    fn step(&mut self) -> Result<Vec<f64>, StopCause>;
    /// Unit tangent of the most recent step.
    fn last_tangent(&self) -> Vec<f64>;
    /// Candidate seed positions around a committed sample with tangent `v`.
    fn seed_frame(&mut self, sample: &[f64], v: &[f64], d_sep: f64) -> Vec<Vec<f64>>;
}

/// Planar (2D) and volumetric (3D) tracer over an explicit vector field,
/// stepped at unit speed.
struct FieldTracer<'a, V: VectorField + ?Sized> {
    field: &'a V,
    h: f64,
    sign: f64,
    cursor: Vec<f64>,
    tangent: Vec<f64>,
    min_speed: f64,
}

impl<'a, V: VectorField + ?Sized> FieldTracer<'a, V> {
    fn new(field: &'a V, h: f64) -> Self {
        let dim = field.dim();
        FieldTracer {
            field,
            h,
            sign: 1.0,
            cursor: vec![0.0; dim],
            tangent: vec![0.0; dim],
            min_speed: 1e-9,
        }
    }
}

impl<V: VectorField + ?Sized> RawTracer for FieldTracer<'_, V> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn admit_seed(&mut self, candidate: &[f64]) -> Option<Vec<f64>> {
        Some(candidate.to_vec())
    }

    fn begin(&mut self, seed: &[f64], forward: bool) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.dim()];
        self.field.eval(seed, &mut v).ok()?;
        let speed = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(speed > self.min_speed) {
            return None;
        }
        self.sign = if forward { 1.0 } else { -1.0 };
        for c in &mut v {
            *c *= self.sign / speed;
        }
        self.cursor = seed.to_vec();
        self.tangent = v.clone();
        Some(v)
    }

    fn step(&mut self) -> Result<Vec<f64>, StopCause> {
        match crate::field::rk4_unit_step(self.field, &self.cursor, self.sign * self.h, self.min_speed)
        {
            Ok(next) => {
                let mut tan: Vec<f64> = next
                    .iter()
                    .zip(&self.cursor)
                    .map(|(a, b)| a - b)
                    .collect();
                let n = tan.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n > 0.0 {
                    for c in &mut tan {
                        *c /= n;
                    }
                    self.tangent = tan;
                }
                self.cursor = next.clone();
                Ok(next)
            }
            Err(_) => Err(StopCause::Stalled),
        }
    }

    fn last_tangent(&self) -> Vec<f64> {
        self.tangent.clone()
    }

    fn seed_frame(&mut self, sample: &[f64], v: &[f64], d_sep: f64) -> Vec<Vec<f64>> {
        match self.dim() {
            2 => {
                // 90° counterclockwise normal, both signs.
                let n = [-v[1], v[0]];
                vec![
                    vec![sample[0] + d_sep * n[0], sample[1] + d_sep * n[1]],
                    vec![sample[0] - d_sep * n[0], sample[1] - d_sep * n[1]],
                ]
            }
            3 => hexagon_candidates(sample, v, d_sep),
            _ => unreachable!("tracer dimensions are 2 or 3"),
        }
    }
}

/// Six points on the circle of radius `r` in the plane orthogonal to `v`,
/// 60° apart (pairwise chord distance at least `r`), with a deterministic
/// frame: the first frame axis comes from the coordinate axis least aligned
/// with `v`.
fn hexagon_candidates(center: &[f64], v: &[f64], r: f64) -> Vec<Vec<f64>> {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() < v[k].abs() {
            k = i;
        }
    }
    let mut w1 = [0.0f64; 3];
    w1[k] = 1.0;
    let d = v[k];
    for i in 0..3 {
        w1[i] -= d * v[i];
    }
    let n1 = (w1[0] * w1[0] + w1[1] * w1[1] + w1[2] * w1[2]).sqrt();
    for c in &mut w1 {
        *c /= n1;
    }
    let w2 = [
        v[1] * w1[2] - v[2] * w1[1],
        v[2] * w1[0] - v[0] * w1[2],
        v[0] * w1[1] - v[1] * w1[0],
    ];
    (0..6)
        .map(|i| {
            let th = std::f64::consts::FRAC_PI_3 * i as f64;
            let (s, c) = th.sin_cos();
            (0..3)
                .map(|j| center[j] + r * (c * w1[j] + s * w2[j]))
                .collect()
        })
        .collect()
}

/// 2.5D tracer: streamlines of the admissible direction field on the
/// surface `{F = 0}` of a first-order scalar equation, stepped through the
/// constrained integrator so every raw point stays on the surface.
struct SurfaceTracer<'a> {
    sys: &'a EquationSystem,
    h: f64,
    cursor: JetPoint,
    dir: Direction,
    classify: ClassifyOpts,
    continuation: ContinuationOpts,
    projection: ProjectOpts,
    dropped_seeds: usize,
}

impl<'a> SurfaceTracer<'a> {
    fn new(sys: &'a EquationSystem, h: f64) -> Self {
        let spec = sys.spec();
        SurfaceTracer {
            sys,
            h,
            cursor: JetPoint::zero(spec),
            dir: Direction {
                a: 1.0,
                b: nalgebra::DVector::zeros(spec.m as usize),
            },
            classify: ClassifyOpts::default(),
            continuation: ContinuationOpts::default(),
            projection: ProjectOpts::default(),
            dropped_seeds: 0,
        }
    }

    fn ambient_tangent(&self) -> Vec<f64> {
        let mut v = self.dir.ambient(&self.cursor);
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut v {
            *c /= n;
        }
        v
    }

    fn gradient(&self, p: &JetPoint) -> Option<Vec<f64>> {
        let jac = self.sys.jacobian(p).ok()?;
        let g: Vec<f64> = (0..p.dim()).map(|i| jac[(0, i)]).collect();
        let n = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < 1e-12 {
            None
        } else {
            Some(g.iter().map(|c| c / n).collect())
        }
    }
}

impl RawTracer for SurfaceTracer<'_> {
    fn dim(&self) -> usize {
        self.sys.spec().ambient_dim()
    }

    fn admit_seed(&mut self, candidate: &[f64]) -> Option<Vec<f64>> {
        let p = JetPoint::new(self.sys.spec(), candidate.to_vec());
        match vessiot::project_to_manifold(self.sys, &p, &self.projection) {
            Ok(q) => Some(q.coords().to_vec()),
            Err(_) => {
                self.dropped_seeds += 1;
                None
            }
        }
    }

    fn begin(&mut self, seed: &[f64], forward: bool) -> Option<Vec<f64>> {
        let p = JetPoint::new(self.sys.spec(), seed.to_vec());
        let class = vessiot::classify(self.sys, &p, &self.classify).ok()?;
        if class.class == PointClass::IrregularSingular {
            return None;
        }
        let mut d = vessiot::initial_direction(self.sys, &p, &self.classify, None).ok()?;
        if !forward {
            d = d.flipped();
        }
        self.cursor = p;
        self.dir = d;
        Some(self.ambient_tangent())
    }

    fn step(&mut self) -> Result<Vec<f64>, StopCause> {
        // Rescale the step so it advances by ~h of *ambient* arclength: the
        // unit admissible direction has ambient speed ≥ 1.
        let speed = self
            .dir
            .ambient(&self.cursor)
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        let opts = IntegrateOpts {
            h: self.h / speed.max(1.0),
            max_steps: 1,
            bounds: None,
            stop_near: Vec::new(),
            stop_radius: 0.0,
            projection: self.projection,
            continuation: self.continuation,
            classify: self.classify,
        };
        match integrate::integrate_generalized(self.sys, &self.cursor, Some(&self.dir), &opts) {
            Ok(tr) if tr.points.len() >= 2 => {
                self.cursor = tr.points[1].clone();
                self.dir = tr.directions[1].clone();
                Ok(self.cursor.coords().to_vec())
            }
            _ => Err(StopCause::Stalled),
        }
    }

    fn last_tangent(&self) -> Vec<f64> {
        self.ambient_tangent()
    }

    fn seed_frame(&mut self, sample: &[f64], v: &[f64], d_sep: f64) -> Vec<Vec<f64>> {
        // Solve, for both signs, the two-parameter system: the point
        // ρ + s·w + τ·n̂ lies on the surface and at distance d_sep from ρ,
        // where n̂ is the unit normal and w the surface-tangent direction
        // orthogonal to the streamline.
        let p = JetPoint::new(self.sys.spec(), sample.to_vec());
        let Some(nh) = self.gradient(&p) else {
            self.dropped_seeds += 2;
            return Vec::new();
        };
        let w = [
            nh[1] * v[2] - nh[2] * v[1],
            nh[2] * v[0] - nh[0] * v[2],
            nh[0] * v[1] - nh[1] * v[0],
        ];
        let wn = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if wn < 1e-9 {
            self.dropped_seeds += 2;
            return Vec::new();
        }
        let w: Vec<f64> = w.iter().map(|c| c / wn).collect();
        let mut out = Vec::new();
        'signs: for s0 in [d_sep, -d_sep] {
            let mut s = s0;
            let mut tau = 0.0;
            for _ in 0..25 {
                let q: Vec<f64> = (0..3)
                    .map(|i| sample[i] + s * w[i] + tau * nh[i])
                    .collect();
                let qp = JetPoint::new(self.sys.spec(), q.clone());
                let Ok(res) = self.sys.residual(&qp) else {
                    self.dropped_seeds += 1;
                    continue 'signs;
                };
                let g1 = res[0];
                let g2 = s * s + tau * tau - d_sep * d_sep;
                let Ok(jac) = self.sys.jacobian(&qp) else {
                    self.dropped_seeds += 1;
                    continue 'signs;
                };
                let gw: f64 = (0..3).map(|i| jac[(0, i)] * w[i]).sum();
                let gn: f64 = (0..3).map(|i| jac[(0, i)] * nh[i]).sum();
                let grad_scale = (gw * gw + gn * gn).sqrt();
                if g1.abs() <= 1e-9 * (1.0 + grad_scale * d_sep) && g2.abs() <= 1e-12 {
                    out.push(q);
                    continue 'signs;
                }
                let det = gw * 2.0 * tau - gn * 2.0 * s;
                if det.abs() < 1e-14 * (1.0 + grad_scale * d_sep) {
                    self.dropped_seeds += 1;
                    continue 'signs;
                }
                let ds = (g1 * 2.0 * tau - gn * g2) / det;
                let dtau = (gw * g2 - g1 * 2.0 * s) / det;
                s -= ds;
                tau -= dtau;
                if !(s.is_finite() && tau.is_finite())
                    || (s * s + tau * tau).sqrt() > 3.0 * d_sep
                {
                    self.dropped_seeds += 1;
                    continue 'signs;
                }
            }
            self.dropped_seeds += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// The placement engine.
// ---------------------------------------------------------------------------

struct SemiTrace {
    samples: Vec<Vec<f64>>,
    tangents: Vec<Vec<f64>>,
    cause: StopCause,
    seed_tangent: Option<Vec<f64>>,
}

/// Trailing window, in sample-index units, within which a line ignores
/// proximity to itself (it is always within `d_test` of its immediate past).
const SELF_WINDOW: f64 = 3.0;

/// Relative slack on the seed-admission radius: candidates are generated at
/// distance exactly `d_sep` from a sample, and rounding must not push them
/// inside their parent's rejection ball.
const SEP_SLACK: f64 = 1.0 - 1e-9;

fn grow_semi<T: RawTracer>(
    tracer: &mut T,
    seed: &[f64],
    forward: bool,
    own: &mut Vec<(Vec<f64>, f64)>,
    params: &PlacementParams,
    n_thin: usize,
    index: &SpatialIndex,
    budget: usize,
) -> SemiTrace {
    let mut out = SemiTrace {
        samples: Vec::new(),
        tangents: Vec::new(),
        cause: StopCause::Stalled,
        seed_tangent: None,
    };
    let Some(t0) = tracer.begin(seed, forward) else {
        return out;
    };
    out.seed_tangent = Some(t0);
    let sign = if forward { 1.0 } else { -1.0 };
    let mut steps_since = 0usize;
    let mut count = 0usize;
    loop {
        if out.samples.len() >= budget {
            out.cause = StopCause::MaxLength;
            break;
        }
        let x = match tracer.step() {
            Ok(x) => x,
            Err(c) => {
                out.cause = c;
                break;
            }
        };
        steps_since += 1;
        let frac = sign * (count as f64 + steps_since as f64 / n_thin as f64);
        if !params.contains(&x) {
            out.cause = StopCause::Boundary;
            break;
        }
        if params.near_singular(&x) {
            out.cause = StopCause::Singularity;
            break;
        }
        if index.any_within(&x, params.d_test) {
            out.cause = StopCause::Proximity;
            break;
        }
        if own
            .iter()
            .any(|(p, idx)| (idx - frac).abs() > SELF_WINDOW && euclid(p, &x) < params.d_test)
        {
            out.cause = StopCause::Proximity;
            break;
        }
        if steps_since == n_thin {
            count += 1;
            own.push((x.clone(), sign * count as f64));
            out.tangents.push(tracer.last_tangent());
            out.samples.push(x);
            steps_since = 0;
        }
    }
    out
}

/// Grow one full streamline from a candidate. Returns the committed line
/// and the per-sample unit tangents (for candidate generation), or `None`
/// if the candidate is inadmissible or cannot start a trace.
fn try_line<T: RawTracer>(
    tracer: &mut T,
    candidate: &[f64],
    params: &PlacementParams,
    n_thin: usize,
    index: &SpatialIndex,
) -> Option<(Streamline, Vec<Vec<f64>>)> {
    let seed = tracer.admit_seed(candidate)?;
    if !params.contains(&seed) || params.near_singular(&seed) {
        return None;
    }
    if index.any_within(&seed, params.d_sep * SEP_SLACK) {
        return None;
    }
    let mut own: Vec<(Vec<f64>, f64)> = vec![(seed.clone(), 0.0)];
    let budget = params.max_line_samples.saturating_sub(1);
    let fwd = grow_semi(tracer, &seed, true, &mut own, params, n_thin, index, budget);
    let bwd = grow_semi(
        tracer,
        &seed,
        false,
        &mut own,
        params,
        n_thin,
        index,
        budget.saturating_sub(fwd.samples.len()),
    );
    let seed_tangent = fwd
        .seed_tangent
        .clone()
        .or_else(|| bwd.seed_tangent.clone())?;
    let mut points: Vec<Vec<f64>> = bwd.samples.iter().rev().cloned().collect();
    let mut tangents: Vec<Vec<f64>> = bwd.tangents.iter().rev().cloned().collect();
    let seed_index = points.len();
    points.push(seed);
    tangents.push(seed_tangent);
    points.extend(fwd.samples);
    tangents.extend(fwd.tangents);
    Some((
        Streamline {
            points,
            seed_index,
            start_cause: bwd.cause,
            end_cause: fwd.cause,
            attributes: None,
        },
        tangents,
    ))
}

fn place_with<T: RawTracer>(
    tracer: &mut T,
    params: &PlacementParams,
) -> Result<Vec<Streamline>, StreamlineError> {
    params.validate(tracer.dim())?;
    let n_thin = (params.d_sep / params.h).ceil() as usize;
    let mut index = SpatialIndex::new(tracer.dim(), params.d_sep);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut lines: Vec<Streamline> = Vec::new();
    let mut queue: VecDeque<Vec<Vec<f64>>> = VecDeque::new();
    queue.push_back(vec![params.seed.clone()]);
    let mut first = true;
    while let Some(batch) = queue.front_mut() {
        if batch.is_empty() {
            queue.pop_front();
            continue;
        }
        let pick = rng.random_range(0..batch.len());
        let candidate = batch.swap_remove(pick);
        match try_line(tracer, &candidate, params, n_thin, &index) {
            Some((line, tangents)) => {
                for p in &line.points {
                    index.insert(p);
                }
                let mut next: Vec<Vec<f64>> = Vec::new();
                for (p, v) in line.points.iter().zip(&tangents) {
                    next.extend(tracer.seed_frame(p, v, params.d_sep));
                }
                lines.push(line);
                if !next.is_empty() {
                    queue.push_back(next);
                }
                first = false;
            }
            None => {
                if first {
                    return Err(StreamlineError::EmptyResult);
                }
            }
        }
    }
    Ok(lines)
}

/// Evenly-spaced streamlines of a planar vector field.
pub fn place_2d<V: VectorField + ?Sized>(
    field: &V,
    params: &PlacementParams,
) -> Result<Vec<Streamline>, StreamlineError> {
    if field.dim() != 2 {
        return Err(StreamlineError::InvalidParams(
            "planar placement needs a 2-dimensional field".into(),
        ));
    }
    let mut tracer = FieldTracer::new(field, params.h);
    place_with(&mut tracer, params)
}

/// Evenly-spaced streamlines of a free three-dimensional vector field.
pub fn place_3d<V: VectorField + ?Sized>(
    field: &V,
    params: &PlacementParams,
) -> Result<Vec<Streamline>, StreamlineError> {
    if field.dim() != 3 {
        return Err(StreamlineError::InvalidParams(
            "volumetric placement needs a 3-dimensional field".into(),
        ));
    }
    let mut tracer = FieldTracer::new(field, params.h);
    place_with(&mut tracer, params)
}

/// Evenly-spaced streamlines of the admissible direction field on the
/// surface defined by a first-order scalar equation in three-dimensional
/// space. Every sample lies on the surface to the projection tolerance;
/// `singular_points` should list the irregular singularities to exclude.
pub fn place_2_5d(
    sys: &EquationSystem,
    params: &PlacementParams,
) -> Result<Vec<Streamline>, StreamlineError> {
    let spec = sys.spec();
    if !(sys.k() == 1 && spec.m == 1 && spec.q == 1) {
        return Err(StreamlineError::InvalidParams(
            "surface placement needs one first-order scalar equation".into(),
        ));
    }
    let mut tracer = SurfaceTracer::new(sys, params.h);
    let result = place_with(&mut tracer, params);
    if tracer.dropped_seeds > 0 {
        log::debug!(
            "surface placement dropped {} candidate seeds whose projection failed",
            tracer.dropped_seeds
        );
    }
    result
}

// ---------------------------------------------------------------------------
// Depth attributes and export.
// ---------------------------------------------------------------------------

/// Observer for depth post-processing of 3D streamlines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    /// View direction (need not be normalized).
    pub view: [f64; 3],
    #[serde(default = "default_min_width")]
    pub min_width: f64,
    #[serde(default = "default_max_width")]
    pub max_width: f64,
}

fn default_min_width() -> f64 {
    0.5
}

fn default_max_width() -> f64 {
    2.0
}

impl Camera {
    pub fn new(position: [f64; 3], view: [f64; 3]) -> Self {
        Camera {
            position,
            view,
            min_width: default_min_width(),
            max_width: default_max_width(),
        }
    }
}

/// Attach per-sample `(color, alpha, width)` attributes, affine in the
/// normalized view depth: the nearest sample gets alpha 1.0 and the widest
/// stroke, the farthest alpha 0.25 and the narrowest; the color scalar is
/// the normalized depth itself, for colormap lookup downstream.
pub fn depth_attributes(lines: &mut [Streamline], cam: &Camera) {
    let vn = {
        let n = (cam.view[0] * cam.view[0] + cam.view[1] * cam.view[1]
            + cam.view[2] * cam.view[2])
            .sqrt();
        [cam.view[0] / n, cam.view[1] / n, cam.view[2] / n]
    };
    let depth_of = |p: &[f64]| -> f64 {
        (0..3).map(|i| (p[i] - cam.position[i]) * vn[i]).sum()
    };
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    for l in lines.iter() {
        for p in &l.points {
            let d = depth_of(p);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
    }
    let range = dmax - dmin;
    for l in lines.iter_mut() {
        let attrs: Vec<[f64; 3]> = l
            .points
            .iter()
            .map(|p| {
                let depth = if range > 0.0 {
                    (depth_of(p) - dmin) / range
                } else {
                    0.0
                };
                let alpha = 1.0 - 0.75 * depth;
                let width = cam.max_width - (cam.max_width - cam.min_width) * depth;
                [depth, alpha, width]
            })
            .collect();
        l.attributes = Some(attrs);
    }
}

fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Render streamlines as SVG polylines, projecting each sample to the two
/// listed coordinate axes. The vertical axis is flipped so larger values
/// appear higher. Lines carrying depth attributes use their mean alpha and
/// width for the stroke.
pub fn svg_polylines(
    lines: &[Streamline],
    axes: (usize, usize),
    lo: (f64, f64),
    hi: (f64, f64),
    stroke_width: f64,
) -> String {
    let mut s = String::new();
    let w = hi.0 - lo.0;
    let h = hi.1 - lo.1;
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">",
        fmt9(lo.0),
        fmt9(lo.1),
        fmt9(w),
        fmt9(h)
    );
    for line in lines {
        if line.points.len() < 2 {
            continue;
        }
        let (alpha, width) = match &line.attributes {
            Some(a) if !a.is_empty() => {
                let n = a.len() as f64;
                (
                    a.iter().map(|t| t[1]).sum::<f64>() / n,
                    a.iter().map(|t| t[2]).sum::<f64>() / n,
                )
            }
            _ => (1.0, stroke_width),
        };
        let mut pts = String::new();
        for p in &line.points {
            let x = p[axes.0];
            let y = lo.1 + hi.1 - p[axes.1];
            if !pts.is_empty() {
                pts.push(' ');
            }
            let _ = write!(pts, "{},{}", fmt9(x), fmt9(y));
        }
        let _ = writeln!(
            s,
            "  <polyline fill=\"none\" stroke=\"black\" stroke-width=\"{}\" stroke-opacity=\"{}\" points=\"{}\"/>",
            fmt9(width),
            fmt9(alpha),
            pts
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_equation, parse_expr_text};
    use crate::field::SymbolicField;
    use crate::jet::JetSpec;
    use std::collections::BTreeMap;

    fn planar_field(fx: &str, fy: &str) -> SymbolicField {
        let spec = JetSpec::new(1, 0);
        let none = BTreeMap::new();
        SymbolicField::new(
            spec,
            vec![
                parse_expr_text(fx, spec, &none).unwrap(),
                parse_expr_text(fy, spec, &none).unwrap(),
            ],
        )
    }

    fn volume_field(fx: &str, fy: &str, fz: &str) -> SymbolicField {
        let spec = JetSpec::new(2, 0);
        let none = BTreeMap::new();
        SymbolicField::new(
            spec,
            vec![
                parse_expr_text(fx, spec, &none).unwrap(),
                parse_expr_text(fy, spec, &none).unwrap(),
                parse_expr_text(fz, spec, &none).unwrap(),
            ],
        )
    }

    fn surface(expr: &str) -> EquationSystem {
        let spec = JetSpec::new(1, 1);
        let none = BTreeMap::new();
        let eq = parse_equation(expr, spec, &none).unwrap();
        EquationSystem::new(spec, vec![eq], Vec::new()).unwrap()
    }

    #[test]
    fn parameters_are_validated() {
        let f = planar_field("1", "0");
        let mut p = PlacementParams::new(
            0.1,
            0.2,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        );
        assert!(matches!(
            place_2d(&f, &p),
            Err(StreamlineError::InvalidParams(_))
        ));
        p.d_test = 0.05;
        p.h = 0.2; // > d_test
        assert!(matches!(
            place_2d(&f, &p),
            Err(StreamlineError::InvalidParams(_))
        ));
        p.h = 0.02;
        p.d_s = -1.0;
        assert!(matches!(
            place_2d(&f, &p),
            Err(StreamlineError::InvalidParams(_))
        ));
    }

    #[test]
    fn spatial_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut index = SpatialIndex::new(3, 0.2);
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for _ in 0..200 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            index.insert(&p);
            pts.push(p);
        }
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = 0.15;
            let brute: Vec<usize> = (0..pts.len()).filter(|&i| euclid(&pts[i], &q) < r).collect();
            let mut got = index.neighbors_within(&q, r);
            got.sort_unstable();
            assert_eq!(got, brute);
            assert_eq!(index.any_within(&q, r), !brute.is_empty());
        }
    }

    #[test]
    fn hexagon_candidates_satisfy_the_chord_property() {
        let v = [1.0 / 3.0f64.sqrt(); 3];
        let c = [0.4, -0.2, 0.9];
        let r = 0.2;
        let hex = hexagon_candidates(&c, &v, r);
        assert_eq!(hex.len(), 6);
        for p in &hex {
            let d = euclid(p, &c);
            assert!((d - r).abs() < 1e-12);
            let dot: f64 = (0..3).map(|i| (p[i] - c[i]) * v[i]).sum();
            assert!(dot.abs() < 1e-12);
        }
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(euclid(&hex[i], &hex[j]) >= r - 1e-12);
            }
        }
    }

    #[test]
    fn uniform_planar_field_fills_the_square_with_parallel_lines() {
        let f = planar_field("1", "0");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        );
        p.h = 0.02;
        let lines = place_2d(&f, &p).unwrap();
        // Every line is horizontal.
        for l in &lines {
            let y0 = l.points[0][1];
            for q in &l.points {
                assert!((q[1] - y0).abs() < 1e-9);
            }
            // Sample spacing stays near the thinning distance.
            for pair in l.points.windows(2) {
                let d = euclid(&pair[0], &pair[1]);
                assert!(d > 0.05 && d < 0.15, "spacing {d}");
            }
        }
        // The first line crosses the whole region.
        assert!(lines[0].start_cause.is_clipped() && lines[0].end_cause.is_clipped());
        // Between 9 and 11 lines with vertical gaps in [0.05, 0.2].
        let mut ys: Vec<f64> = lines.iter().map(|l| l.points[0][1]).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            (9..=11).contains(&ys.len()),
            "expected 9–11 lines, got {}",
            ys.len()
        );
        for pair in ys.windows(2) {
            let gap = pair[1] - pair[0];
            assert!(
                (0.049..=0.201).contains(&gap),
                "vertical gap {gap} out of range"
            );
        }
    }

    #[test]
    fn rotational_field_respects_the_singular_exclusion() {
        let f = planar_field("neg(u1_0)", "t");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.0],
        );
        p.h = 0.02;
        p.d_s = 0.1;
        p.singular_points = vec![vec![0.0, 0.0]];
        let lines = place_2d(&f, &p).unwrap();
        assert!(lines.len() >= 8, "got {} lines", lines.len());
        let mut closest = f64::INFINITY;
        for l in &lines {
            // Each line stays on its own circle (radius nearly constant).
            let r0 = euclid(&l.points[0], &[0.0, 0.0]);
            for q in &l.points {
                let r = euclid(q, &[0.0, 0.0]);
                closest = closest.min(r);
                assert!((r - r0).abs() < 1e-3, "radius drift {}", (r - r0).abs());
            }
        }
        assert!(closest >= 0.1, "sample at distance {closest} from center");
        // Separation between samples of distinct lines.
        let mut min_sep = f64::INFINITY;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                for a in &lines[i].points {
                    for b in &lines[j].points {
                        min_sep = min_sep.min(euclid(a, b));
                    }
                }
            }
        }
        assert!(min_sep >= 0.05, "distinct-line separation {min_sep}");
    }

    #[test]
    fn inadmissible_initial_seed_is_an_error() {
        let f = planar_field("1", "0");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 0.5], // outside
        );
        p.h = 0.02;
        assert_eq!(place_2d(&f, &p), Err(StreamlineError::EmptyResult));
        p.seed = vec![0.5, 0.5];
        p.d_s = 0.2;
        p.singular_points = vec![vec![0.52, 0.5]];
        assert_eq!(place_2d(&f, &p), Err(StreamlineError::EmptyResult));
    }

    #[test]
    fn placement_is_deterministic() {
        let f = planar_field("neg(u1_0)", "t");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.0],
        );
        p.h = 0.02;
        p.rng_seed = 42;
        let a = place_2d(&f, &p).unwrap();
        let b = place_2d(&f, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_surface_reduces_to_planar_behaviour() {
        // u̇ = 1 is a plane; the admissible field on it runs diagonally in
        // (t, u). All samples stay exactly in the plane.
        let sys = surface("u1_1 = 1");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![0.0, 0.0, 0.5],
            vec![1.0, 1.0, 1.5],
            vec![0.5, 0.5, 1.0],
        );
        p.h = 0.02;
        let lines = place_2_5d(&sys, &p).unwrap();
        assert!(lines.len() >= 6, "got {} lines", lines.len());
        for l in &lines {
            for q in &l.points {
                assert!((q[2] - 1.0).abs() <= 1e-9, "sample off the plane");
                // u − t is constant along each diagonal line.
                let c0 = l.points[0][1] - l.points[0][0];
                assert!((q[1] - q[0] - c0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_surface_keeps_samples_on_manifold_and_off_the_poles() {
        let sys = surface("t^2 + u1_0^2 + u1_1^2 = 1");
        let mut p = PlacementParams::new(
            0.1,
            0.05,
            vec![-1.1, -1.1, -1.1],
            vec![1.1, 1.1, 1.1],
            vec![1.0, 0.0, 0.0],
        );
        p.h = 0.02;
        p.d_s = 0.1;
        p.singular_points = vec![vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0]];
        let lines = place_2_5d(&sys, &p).unwrap();
        assert!(lines.len() >= 5, "got {} lines", lines.len());
        let mut sample_count = 0;
        for l in &lines {
            for q in &l.points {
                sample_count += 1;
                let f = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] - 1.0;
                assert!(f.abs() <= 1e-9, "off-surface residual {f:.2e}");
                for s in &p.singular_points {
                    assert!(euclid(q, s) >= p.d_s, "sample inside the exclusion zone");
                }
            }
        }
        assert!(sample_count > 100);
        // Determinism across reruns.
        let again = place_2_5d(&sys, &p).unwrap();
        assert_eq!(lines, again);
    }

    #[test]
    fn uniform_volume_field_packs_the_cross_section() {
        let f = volume_field("1", "0", "0");
        let mut p = PlacementParams::new(
            0.2,
            0.1,
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.5, 0.5, 0.5],
        );
        p.h = 0.04;
        let lines = place_3d(&f, &p).unwrap();
        assert!(
            (12..=40).contains(&lines.len()),
            "got {} lines",
            lines.len()
        );
        // Lines run along x with fixed (y, z); distinct lines keep d_test.
        for l in &lines {
            for q in &l.points {
                assert!((q[1] - l.points[0][1]).abs() < 1e-9);
                assert!((q[2] - l.points[0][2]).abs() < 1e-9);
            }
        }
        let mut min_sep = f64::INFINITY;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let a = &lines[i].points[0];
                let b = &lines[j].points[0];
                min_sep = min_sep.min(euclid(&[a[1], a[2]], &[b[1], b[2]]));
            }
        }
        assert!(min_sep >= 0.1, "cross-section separation {min_sep}");
    }

    #[test]
    fn depth_attributes_ramp_with_distance() {
        let line = Streamline {
            points: (0..10).map(|i| vec![0.0, 0.0, i as f64]).collect(),
            seed_index: 0,
            start_cause: StopCause::Boundary,
            end_cause: StopCause::Boundary,
            attributes: None,
        };
        let mut lines = vec![line];
        let cam = Camera::new([0.0, 0.0, -5.0], [0.0, 0.0, 1.0]);
        depth_attributes(&mut lines, &cam);
        let attrs = lines[0].attributes.as_ref().unwrap();
        assert_eq!(attrs.len(), 10);
        assert!((attrs[0][1] - 1.0).abs() < 1e-12, "nearest alpha 1.0");
        assert!((attrs[9][1] - 0.25).abs() < 1e-12, "farthest alpha 0.25");
        for w in attrs.windows(2) {
            assert!(w[1][0] > w[0][0]); // depth increases
            assert!(w[1][1] < w[0][1]); // alpha decreases
            assert!(w[1][2] < w[0][2]); // width decreases
        }
        assert!((attrs[0][2] - cam.max_width).abs() < 1e-12);
        assert!((attrs[9][2] - cam.min_width).abs() < 1e-12);
        // Constant-depth scene: flat attributes.
        let flat = Streamline {
            points: (0..5).map(|i| vec![i as f64, 0.0, 3.0]).collect(),
            seed_index: 0,
            start_cause: StopCause::Boundary,
            end_cause: StopCause::Boundary,
            attributes: None,
        };
        let mut lines = vec![flat];
        depth_attributes(&mut lines, &cam);
        for a in lines[0].attributes.as_ref().unwrap() {
            assert_eq!(a[0], 0.0);
            assert_eq!(a[1], 1.0);
            assert_eq!(a[2], cam.max_width);
        }
    }

    #[test]
    fn svg_export_is_deterministic_and_flips_the_vertical_axis() {
        let line = Streamline {
            points: vec![vec![0.0, 0.25], vec![1.0, 0.25]],
            seed_index: 0,
            start_cause: StopCause::Boundary,
            end_cause: StopCause::Boundary,
            attributes: None,
        };
        let svg = svg_polylines(&[line.clone()], (0, 1), (0.0, 0.0), (1.0, 1.0), 0.01);
        assert!(svg.starts_with("<svg xmlns"));
        assert!(svg.contains("<polyline"));
        // y = 0.25 flips to 0.75.
        assert!(svg.contains("0,7.50000000e-1"), "svg was: {svg}");
        let svg2 = svg_polylines(&[line], (0, 1), (0.0, 0.0), (1.0, 1.0), 0.01);
        assert_eq!(svg, svg2);
    }
}
