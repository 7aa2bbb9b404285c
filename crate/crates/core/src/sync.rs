//! Time-offset estimation between two pose streams by aligning their
//! cumulative-motion curves along the time axis.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{interpolate_pose, rotation_angle_deg, TimedPose, Trajectory, Vec3};

/// Iteration cap of [`estimate_offset_icp`].
pub const MAX_SYNC_ITERATIONS: usize = 100;

/// Minimum overlap between shifted curves, as a fraction of the shorter one.
pub const MIN_OVERLAP_FRACTION: f64 = 0.25;

const GRID_TOL: f64 = 1e-9;

/// Cumulative motion sampled on a uniform time grid. `d` is non-negative and
/// non-decreasing; it is arc length in meters for translational curves and
/// accumulated rotation angle in radians for rotational ones.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceCurve {
    samples: Vec<(f64, f64)>,
    dt: f64,
}

impl DistanceCurve {
    pub fn new(samples: Vec<(f64, f64)>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositiveStep(dt));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        let t0 = samples[0].0;
        let mut prev = 0.0;
        for (i, &(t, d)) in samples.iter().enumerate() {
            if !t.is_finite() || !d.is_finite() {
                return Err(Error::InvalidTrajectory(format!("non-finite curve sample {i}")));
            }
            if (t - (t0 + i as f64 * dt)).abs() > GRID_TOL * (1.0 + t.abs()) {
                return Err(Error::InvalidTrajectory(format!("sample {i} is off the uniform grid")));
            }
            if d < 0.0 || d < prev {
                return Err(Error::InvalidTrajectory(format!("distance decreases at sample {i}")));
            }
            prev = d;
        }
        Ok(DistanceCurve { samples, dt })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn start(&self) -> f64 {
        self.samples[0].0
    }

    fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Linear interpolation of `d` at `t`; `None` outside the span.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let (start, end) = (self.start(), self.end());
        if t < start || t > end {
            return None;
        }
        let x = (t - start) / self.dt;
        let k = (x.floor() as usize).min(self.samples.len().saturating_sub(2));
        if self.samples.len() == 1 {
            return Some(self.samples[0].1);
        }
        let (t0, d0) = self.samples[k];
        let (t1, d1) = self.samples[k + 1];
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Some(d0 + (d1 - d0) * s)
    }
}

/// Which motion component a curve accumulates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CurveSignal {
    #[default]
    Translation,
    Rotation,
}

/// Curve construction options. `smooth` is the half-width, in grid samples,
/// of a centered moving average applied to the resampled poses before
/// accumulating; it suppresses the upward bias that per-sample noise adds to
/// arc length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CurveOptions {
    pub signal: CurveSignal,
    pub smooth: usize,
}

fn uniform_grid(traj: &Trajectory, dt: f64) -> Result<Vec<TimedPose>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonPositiveStep(dt));
    }
    let (start, end) = traj.span().ok_or(Error::TooFewPoses { needed: 2, got: 0 })?;
    if traj.len() < 2 {
        return Err(Error::TooFewPoses { needed: 2, got: traj.len() });
    }
    let n = ((end - start) / dt + GRID_TOL).floor() as usize + 1;
    (0..n)
        .map(|k| {
            let t = start + k as f64 * dt;
            Ok(TimedPose { t, pose: interpolate_pose(traj, t.min(end))? })
        })
        .collect()
}

/// Window `[i - h, i + h]` shrunk symmetrically so it stays inside `0..n`.
fn window(i: usize, n: usize, half: usize) -> std::ops::RangeInclusive<usize> {
    let h = half.min(i).min(n - 1 - i);
    (i - h)..=(i + h)
}

/// Translational arc length on a uniform grid starting at the first sample.
pub fn distance_curve(traj: &Trajectory, dt: f64) -> Result<DistanceCurve> {
    motion_curve(traj, dt, &CurveOptions::default())
}

pub fn motion_curve(traj: &Trajectory, dt: f64, options: &CurveOptions) -> Result<DistanceCurve> {
    let grid = uniform_grid(traj, dt)?;
    let n = grid.len();
    let steps: Vec<f64> = match options.signal {
        CurveSignal::Translation => {
            let raw: Vec<Vec3> = grid.iter().map(|s| *s.pose.translation()).collect();
            let pts: Vec<Vec3> = if options.smooth == 0 {
                raw
            } else {
                (0..n)
                    .map(|i| {
                        let w = window(i, n, options.smooth);
                        let len = (w.end() - w.start() + 1) as f64;
                        w.map(|j| raw[j]).sum::<Vec3>() / len
                    })
                    .collect()
            };
            pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
        }
        CurveSignal::Rotation => {
            let raw: Vec<_> = grid.iter().map(|s| *s.pose.rotation()).collect();
            let rots: Vec<_> = if options.smooth == 0 {
                raw
            } else {
                (0..n)
                    .map(|i| {
                        let reference = raw[i].coords;
                        let sum = window(i, n, options.smooth)
                            .map(|j| {
                                let c = raw[j].coords;
                                if c.dot(&reference) < 0.0 {
                                    -c
                                } else {
                                    c
                                }
                            })
                            .sum::<nalgebra::Vector4<f64>>();
                        nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(sum))
                    })
                    .collect()
            };
            rots.windows(2).map(|w| rotation_angle_deg(&w[0], &w[1]).to_radians()).collect()
        }
    };
    let mut samples = Vec::with_capacity(n);
    let mut d = 0.0;
    samples.push((grid[0].t, 0.0));
    for (s, step) in grid[1..].iter().zip(steps) {
        d += step;
        samples.push((s.t, d));
    }
    Ok(DistanceCurve { samples, dt })
}

/// Result of a time-offset estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncResult {
    /// Seconds to add to stream B timestamps to align it with stream A.
    pub offset: f64,
    /// RMS of `d_b − d_a` over the overlap after alignment.
    pub residual: f64,
    pub iterations: usize,
}

fn check_pair(a: &DistanceCurve, b: &DistanceCurve, max_offset: f64) -> Result<()> {
    if !(max_offset > 0.0) {
        return Err(Error::InvalidConfig(format!("max_offset must be positive, got {max_offset}")));
    }
    if (a.dt - b.dt).abs() > GRID_TOL * a.dt.max(b.dt) {
        return Err(Error::DegenerateConfiguration(format!("curves use different steps: {} vs {}", a.dt, b.dt)));
    }
    Ok(())
}

fn required_overlap(a: &DistanceCurve, b: &DistanceCurve) -> usize {
    (MIN_OVERLAP_FRACTION * a.len().min(b.len()) as f64).ceil() as usize
}

/// Number of B samples that land inside A's span after shifting by `offset`,
/// and the RMS of their distance mismatch.
fn overlap_rmse(a: &DistanceCurve, b: &DistanceCurve, offset: f64) -> (usize, f64) {
    let mut n = 0usize;
    let mut ss = 0.0;
    for &(t, d) in &b.samples {
        if let Some(da) = a.value_at(t + offset) {
            n += 1;
            ss += (d - da) * (d - da);
        }
    }
    (n, if n == 0 { f64::INFINITY } else { (ss / n as f64).sqrt() })
}

fn ensure_overlap(a: &DistanceCurve, b: &DistanceCurve, offset: f64) -> Result<f64> {
    let (overlap, rmse) = overlap_rmse(a, b, offset);
    let required = required_overlap(a, b);
    if overlap < required || overlap == 0 {
        return Err(Error::InsufficientOverlap { overlap, required });
    }
    Ok(rmse)
}

/// Index of the A vertex nearest to `(t, d)` in the plane, lowest index on
/// ties. Expands outward from the grid position until the time gap alone
/// exceeds the best distance.
fn nearest_vertex(a: &DistanceCurve, t: f64, d: f64) -> usize {
    let n = a.samples.len();
    let guess = (((t - a.start()) / a.dt).round().max(0.0) as usize).min(n - 1);
    let dist = |k: usize| {
        let (tk, dk) = a.samples[k];
        (tk - t).powi(2) + (dk - d).powi(2)
    };
    let mut best = (dist(guess), guess);
    let mut lo = guess;
    let mut hi = guess;
    loop {
        let mut advanced = false;
        if lo > 0 && (a.samples[lo - 1].0 - t).powi(2) <= best.0 {
            lo -= 1;
            let c = (dist(lo), lo);
            if c.0 < best.0 || (c.0 == best.0 && c.1 < best.1) {
                best = c;
            }
            advanced = true;
        }
        if hi + 1 < n && (a.samples[hi + 1].0 - t).powi(2) <= best.0 {
            hi += 1;
            let c = (dist(hi), hi);
            if c.0 < best.0 {
                best = c;
            }
            advanced = true;
        }
        if !advanced {
            return best.1;
        }
    }
}

/// 1-D ICP on the planar curves `(t, d)`: each shifted B point is matched to
/// the nearest A vertex, and the shift along the time axis is refit by least
/// squares against the line of the adjacent A segment.
///
/// Returns [`Error::NoConvergence`] carrying the last estimate when the
/// iteration cap is reached.
pub fn estimate_offset_icp(a: &DistanceCurve, b: &DistanceCurve, max_offset: f64) -> Result<SyncResult> {
    check_pair(a, b, max_offset)?;
    let zero_rmse = ensure_overlap(a, b, 0.0)?;
    let tol = a.dt * 1e-3;
    let mut s = 0.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_SYNC_ITERATIONS {
        iterations += 1;
        ensure_overlap(a, b, s)?;
        let (mut num, mut den) = (0.0, 0.0);
        for &(tb, db) in &b.samples {
            let t = tb + s;
            if t < a.start() || t > a.end() {
                continue;
            }
            let k = nearest_vertex(a, t, db);
            let seg = if (t >= a.samples[k].0 && k + 1 < a.len()) || k == 0 { k } else { k - 1 };
            if seg + 1 >= a.len() {
                continue;
            }
            let (t0, d0) = a.samples[seg];
            let (t1, d1) = a.samples[seg + 1];
            let (ux, uy) = (t1 - t0, d1 - d0);
            let len = (ux * ux + uy * uy).sqrt();
            let (nx, ny) = (-uy / len, ux / len);
            // anchored at the matched vertex so exact matches give exactly zero
            let (tk, dk) = a.samples[k];
            let r = nx * (t - tk) + ny * (db - dk);
            num += nx * r;
            den += nx * nx;
        }
        let step = if den > 0.0 { -num / den } else { 0.0 };
        let next = (s + step).clamp(-max_offset, max_offset);
        let change = (next - s).abs();
        s = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let residual = ensure_overlap(a, b, s)?;
    if !converged {
        return Err(Error::NoConvergence { offset: s, iterations });
    }
    if residual > zero_rmse {
        return Ok(SyncResult { offset: 0.0, residual: zero_rmse, iterations });
    }
    Ok(SyncResult { offset: s, residual, iterations })
}

/// Exhaustive search over integer multiples of `dt` in `[−max_offset,
/// max_offset]`. Candidates with too little overlap are skipped; ties go to
/// the smaller `|offset|`, then the negative one.
pub fn brute_force_offset(a: &DistanceCurve, b: &DistanceCurve, max_offset: f64) -> Result<SyncResult> {
    check_pair(a, b, max_offset)?;
    let k_max = (max_offset / a.dt + GRID_TOL).floor() as i64;
    let required = required_overlap(a, b);
    let candidates: Vec<(i64, usize, f64)> = (-k_max..=k_max)
        .into_par_iter()
        .map(|k| {
            let (n, rmse) = overlap_rmse(a, b, k as f64 * a.dt);
            (k, n, rmse)
        })
        .collect();
    let best = candidates
        .iter()
        .filter(|(_, n, _)| *n >= required && *n > 0)
        .min_by(|x, y| x.2.total_cmp(&y.2).then(x.0.abs().cmp(&y.0.abs())).then(x.0.cmp(&y.0)));
    match best {
        Some(&(k, _, residual)) => Ok(SyncResult { offset: k as f64 * a.dt, residual, iterations: candidates.len() }),
        None => {
            let overlap = candidates.iter().map(|c| c.1).max().unwrap_or(0);
            Err(Error::InsufficientOverlap { overlap, required })
        }
    }
}

/// Shifts every timestamp by `offset`; poses are untouched.
pub fn apply_offset(traj: &Trajectory, offset: f64) -> Result<Trajectory> {
    let samples = traj.samples().iter().map(|s| TimedPose { t: s.t + offset, pose: s.pose.clone() }).collect();
    Trajectory::new(traj.parent_frame().clone(), traj.child_frame().clone(), samples)
}

/// Estimates the offset to add to `b`'s timestamps so that it lines up with
/// `a`, building both curves with the same options.
pub fn synchronize_streams(
    a: &Trajectory,
    b: &Trajectory,
    dt: f64,
    max_offset: f64,
    options: &CurveOptions,
) -> Result<SyncResult> {
    let ca = motion_curve(a, dt, options)?;
    let cb = motion_curve(b, dt, options)?;
    estimate_offset_icp(&ca, &cb, max_offset)
}
