//! Arclength integration of generalized solutions.
//!
//! A generalized solution is an integral curve of the admissible direction
//! field on the zero set, parametrized by the unit coefficient norm rather
//! than by `t`. That parametrization survives points where the curve turns
//! vertical (regular singular points), so folds and cusps of the classical
//! picture are ordinary interior points of the integration.
//!
//! Stepping is classical fourth-order Runge–Kutta in the ambient jet space,
//! with the direction re-solved at every stage by warm-started continuation
//! and the point pulled back onto the zero set whenever the residual drifts.

use crate::expr::EquationSystem;
use crate::jet::JetPoint;
use crate::vessiot::{
    self, ClassifyOpts, ContinuationOpts, Direction, PointClass, ProjectOpts, VessiotError,
};
use thiserror::Error;

/// A coordinate box in the ambient jet space.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Bounds {
        assert_eq!(lo.len(), hi.len());
        Bounds { lo, hi }
    }

    /// Unbounded box of the given dimension.
    pub fn unbounded(dim: usize) -> Bounds {
        Bounds {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    /// Restrict one coordinate of an existing box.
    pub fn clamp_coord(mut self, i: usize, lo: f64, hi: f64) -> Bounds {
        self.lo[i] = lo;
        self.hi[i] = hi;
        self
    }

    pub fn contains(&self, p: &JetPoint) -> bool {
        p.coords()
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The step budget ran out.
    MaxSteps,
    /// The next point left the configured box; it was discarded.
    Boundary,
    /// The next point came within the stop radius of a listed singular
    /// point; it was discarded.
    NearSingularity,
    /// Direction continuation or zero-set projection stopped converging;
    /// the trajectory up to the last trusted point is kept.
    NoConvergence,
}

/// An integrated generalized solution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Points on the zero set, in order; the starting point comes first.
    pub points: Vec<JetPoint>,
    /// Unit direction at each point, consistently oriented.
    pub directions: Vec<Direction>,
    /// Cumulative ambient arclength at each point (zero at the start).
    pub arclength: Vec<f64>,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &JetPoint {
        self.points.last().expect("trajectory holds its start point")
    }

    pub fn total_arclength(&self) -> f64 {
        *self.arclength.last().unwrap_or(&0.0)
    }
}

/// Failures that prevent an integration from starting at all.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("starting point is irregular singular: the admissible direction is not unique there")]
    IrregularStart,
    #[error("starting point is off the zero set (residual {residual:.3e}) and projection failed")]
    StartOffManifold { residual: f64 },
    #[error(transparent)]
    Vessiot(#[from] VessiotError),
}

/// Controls for [`integrate_generalized`].
#[derive(Debug, Clone)]
pub struct IntegrateOpts {
    /// Arclength step in the unit coefficient parametrization.
    pub h: f64,
    pub max_steps: usize,
    /// Stop (dropping the offending point) when the trajectory leaves this
    /// box.
    pub bounds: Option<Bounds>,
    /// Known singular points to keep away from.
    pub stop_near: Vec<JetPoint>,
    /// Distance to the points in `stop_near` at which to stop.
    pub stop_radius: f64,
    pub projection: ProjectOpts,
    pub continuation: ContinuationOpts,
    pub classify: ClassifyOpts,
}

impl Default for IntegrateOpts {
    fn default() -> Self {
        IntegrateOpts {
            h: 0.01,
            max_steps: 10_000,
            bounds: None,
            stop_near: Vec::new(),
            stop_radius: 0.05,
            projection: ProjectOpts::default(),
            continuation: ContinuationOpts::default(),
            classify: ClassifyOpts::default(),
        }
    }
}

/// One Runge–Kutta step of the ambient direction field. Returns the
/// unprojected end point and the direction at the final stage.
fn rk4_step(
    sys: &EquationSystem,
    p: &JetPoint,
    d: &Direction,
    h: f64,
    copts: &ContinuationOpts,
) -> Result<(JetPoint, Direction), VessiotError> {
    let k1 = d.ambient(p);
    let p2 = p.advanced(&k1, h / 2.0);
    let d2 = vessiot::continued_direction(sys, &p2, d, copts)?;
    let k2 = d2.ambient(&p2);
    let p3 = p.advanced(&k2, h / 2.0);
    let d3 = vessiot::continued_direction(sys, &p3, &d2, copts)?;
    let k3 = d3.ambient(&p3);
    let p4 = p.advanced(&k3, h);
    let d4 = vessiot::continued_direction(sys, &p4, &d3, copts)?;
    let k4 = d4.ambient(&p4);
    let combo: Vec<f64> = (0..k1.len())
        .map(|i| k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        .collect();
    Ok((p.advanced(&combo, h / 6.0), d4))
}

/// Integrate the generalized solution through `start`.
///
/// The starting point is projected onto the zero set if necessary and must
/// not be irregular singular. `orientation`, when given, seeds the direction
/// of travel (pass a flipped direction to integrate the other way);
/// otherwise the canonical orientation — forward in `t` where possible — is
/// used.
pub fn integrate_generalized(
    sys: &EquationSystem,
    start: &JetPoint,
    orientation: Option<&Direction>,
    opts: &IntegrateOpts,
) -> Result<Trajectory, IntegrateError> {
    let mut p = start.clone();
    let residual = sys.residual_norm(&p).map_err(VessiotError::from)?;
    if residual > opts.projection.tol_residual {
        p = vessiot::project_to_manifold(sys, &p, &opts.projection)
            .map_err(|_| IntegrateError::StartOffManifold { residual })?;
    }
    let class = vessiot::classify(sys, &p, &opts.classify)?;
    if class.class == PointClass::IrregularSingular {
        return Err(IntegrateError::IrregularStart);
    }
    let d0 = vessiot::initial_direction(sys, &p, &opts.classify, orientation)?;

    let mut points = vec![p.clone()];
    let mut directions = vec![d0.clone()];
    let mut arclength = vec![0.0];
    let mut d = d0;
    let mut stop = StopReason::MaxSteps;
    for _ in 0..opts.max_steps {
        let (raw, d_end) = match rk4_step(sys, &p, &d, opts.h, &opts.continuation) {
            Ok(x) => x,
            Err(e) => {
                log::debug!("integration step failed: {e}");
                stop = StopReason::NoConvergence;
                break;
            }
        };
        // Pull back onto the zero set when the residual drifts beyond half
        // the acceptance tolerance.
        let next = match sys.residual_norm(&raw) {
            Ok(r) if r > opts.projection.tol_residual / 2.0 => {
                match vessiot::project_to_manifold(sys, &raw, &opts.projection) {
                    Ok(q) => q,
                    Err(e) => {
                        log::debug!("projection failed mid-trajectory: {e}");
                        stop = StopReason::NoConvergence;
                        break;
                    }
                }
            }
            Ok(_) => raw,
            Err(e) => {
                log::debug!("residual evaluation failed mid-trajectory: {e}");
                stop = StopReason::NoConvergence;
                break;
            }
        };
        if opts.stop_radius > 0.0
            && opts
                .stop_near
                .iter()
                .any(|s| next.distance(s) < opts.stop_radius)
        {
            stop = StopReason::NearSingularity;
            break;
        }
        if let Some(b) = &opts.bounds {
            if !b.contains(&next) {
                stop = StopReason::Boundary;
                break;
            }
        }
        let d_next = match vessiot::continued_direction(sys, &next, &d_end, &opts.continuation) {
            Ok(x) => x,
            Err(e) => {
                log::debug!("direction update failed after projection: {e}");
                stop = StopReason::NoConvergence;
                break;
            }
        };
        let ds = p.distance(&next);
        arclength.push(arclength.last().unwrap() + ds);
        points.push(next.clone());
        directions.push(d_next.clone());
        p = next;
        d = d_next;
    }
    Ok(Trajectory {
        points,
        directions,
        arclength,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::load_equation_system;

    fn exponential() -> EquationSystem {
        load_equation_system(r#"{"m":1,"q":1,"equations":["u1_1 - u1_0"]}"#).unwrap()
    }

    fn fold() -> EquationSystem {
        load_equation_system(r#"{"m":1,"q":1,"equations":["u1_1^2 - t"]}"#).unwrap()
    }

    fn circle() -> EquationSystem {
        load_equation_system(r#"{"m":1,"q":1,"equations":["u1_1^2 + u1_0^2 - 1"]}"#).unwrap()
    }

    fn pt(sys: &EquationSystem, coords: &[f64]) -> JetPoint {
        JetPoint::new(sys.spec(), coords.to_vec())
    }

    /// Composite Simpson quadrature.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn exponential_solution_is_tracked_to_high_accuracy() {
        let sys = exponential();
        let eps = 0.05;
        let opts = IntegrateOpts {
            bounds: Some(Bounds::unbounded(3).clamp_coord(0, -0.1, 1.0)),
            max_steps: 500,
            ..Default::default()
        };
        let traj = integrate_generalized(&sys, &pt(&sys, &[0.0, eps, eps]), None, &opts).unwrap();
        assert_eq!(traj.stop, StopReason::Boundary);
        let t_end = traj.last().t();
        assert!(t_end > 0.97 && t_end <= 1.0, "stopped at t = {t_end}");
        for p in &traj.points {
            let exact = eps * p.t().exp();
            assert!(
                (p.get(1, 0) - exact).abs() < 1e-6,
                "u({}) = {} vs {exact}",
                p.t(),
                p.get(1, 0)
            );
        }
        // Consecutive samples stay within twice the step in ambient distance.
        for w in traj.points.windows(2) {
            assert!(w[0].distance(&w[1]) <= 2.0 * opts.h);
        }
        // Cumulative ambient arclength tracks the exact curve length, and
        // the step parameter stays within 20% of it.
        let exact_len = simpson(
            |t| (1.0 + 2.0 * (eps * t.exp()).powi(2)).sqrt(),
            0.0,
            t_end,
            400,
        );
        let got = traj.total_arclength();
        assert!(
            (got - exact_len).abs() < 1e-3 * exact_len,
            "arclength {got} vs {exact_len}"
        );
        let param_len = (traj.len() - 1) as f64 * opts.h;
        assert!((param_len - got).abs() <= 0.2 * got);
    }

    #[test]
    fn generalized_solution_crosses_the_fold() {
        // u̇² = t folds over the line t = 0; the generalized solution
        // t = w², u = 2w³/3 passes straight through the regular singular
        // point at w = 0.
        let sys = fold();
        let start = pt(&sys, &[1.0, 2.0 / 3.0, 1.0]);
        let forward =
            vessiot::initial_direction(&sys, &start, &Default::default(), None).unwrap();
        let opts = IntegrateOpts {
            bounds: Some(Bounds::unbounded(3).clamp_coord(0, -0.5, 1.05)),
            max_steps: 2_000,
            ..Default::default()
        };
        let traj =
            integrate_generalized(&sys, &start, Some(&forward.flipped()), &opts).unwrap();
        assert_eq!(traj.stop, StopReason::Boundary);
        // The top-order coordinate sweeps monotonically from 1 through 0 to
        // about −1, so the trajectory crossed the singular locus.
        let w_values: Vec<f64> = traj.points.iter().map(|p| p.get(1, 1)).collect();
        assert!(w_values.windows(2).all(|w| w[1] < w[0]));
        assert!(*w_values.last().unwrap() < -1.0);
        assert!(
            w_values.iter().any(|w| w.abs() < 0.02),
            "no sample near the fold point"
        );
        // Membership and the exact cubic shape hold along the whole curve.
        for p in &traj.points {
            assert!((p.get(1, 1).powi(2) - p.t()).abs() < 1e-8);
            assert!((p.get(1, 0) - 2.0 * p.get(1, 1).powi(3) / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn irregular_start_is_an_error() {
        let sys = circle();
        let err =
            integrate_generalized(&sys, &pt(&sys, &[0.0, 1.0, 0.0]), None, &Default::default())
                .unwrap_err();
        assert_eq!(err, IntegrateError::IrregularStart);
    }

    #[test]
    fn off_manifold_start_is_projected_first() {
        let sys = circle();
        let opts = IntegrateOpts {
            max_steps: 5,
            ..Default::default()
        };
        let traj =
            integrate_generalized(&sys, &pt(&sys, &[0.0, 0.02, 1.04]), None, &opts).unwrap();
        assert!(sys.residual_norm(&traj.points[0]).unwrap() <= 1e-9);
        assert_eq!(traj.stop, StopReason::MaxSteps);
        assert_eq!(traj.len(), 6);
    }

    #[test]
    fn stops_short_of_a_listed_singular_point() {
        // Along u = sin t the curve runs into the irregular point at
        // (π/2, 1, 0); the stop list halts it at the configured radius.
        let sys = circle();
        let singular = pt(&sys, &[std::f64::consts::FRAC_PI_2, 1.0, 0.0]);
        let opts = IntegrateOpts {
            stop_near: vec![singular.clone()],
            stop_radius: 0.05,
            max_steps: 5_000,
            ..Default::default()
        };
        let traj =
            integrate_generalized(&sys, &pt(&sys, &[0.0, 0.0, 1.0]), None, &opts).unwrap();
        assert_eq!(traj.stop, StopReason::NearSingularity);
        let final_gap = traj.last().distance(&singular);
        assert!(
            final_gap >= 0.05 && final_gap < 0.05 + 3.0 * opts.h,
            "gap {final_gap}"
        );
        // Every retained sample keeps the distance.
        assert!(traj.points.iter().all(|p| p.distance(&singular) >= 0.05));
    }

    #[test]
    fn integration_is_deterministic() {
        let sys = circle();
        let opts = IntegrateOpts {
            max_steps: 200,
            ..Default::default()
        };
        let a = integrate_generalized(&sys, &pt(&sys, &[0.0, 0.0, 1.0]), None, &opts).unwrap();
        let b = integrate_generalized(&sys, &pt(&sys, &[0.0, 0.0, 1.0]), None, &opts).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.coords(), y.coords());
        }
    }
}
