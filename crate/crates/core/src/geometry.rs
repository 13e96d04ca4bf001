//! Coordinates, microphone array layout and measurement trajectories.
//!
//! Angles cross the public API in degrees and are converted to radians
//! internally. Azimuth is measured counterclockwise from +x in the horizontal
//! plane, elevation upward from that plane.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position or direction in meters (dimensionless for directions).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Azimuth in (-180, 180] and elevation in [-90, 90], both in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Direction { azimuth, elevation }
    }

    /// Spherical angles of a nonzero vector; `None` for the zero vector.
    pub fn from_vector(v: Vec3) -> Option<Direction> {
        let u = v.normalized()?;
        let azimuth = u.y.atan2(u.x).to_degrees();
        let elevation = u.z.clamp(-1.0, 1.0).asin().to_degrees();
        // atan2 can return exactly -180 for (-x, -0.0)
        let azimuth = if azimuth <= -180.0 { azimuth + 360.0 } else { azimuth };
        Some(Direction { azimuth, elevation })
    }

    pub fn unit_vector(self) -> Vec3 {
        sph_to_cart(self, 1.0)
    }
}

pub fn sph_to_cart(d: Direction, r: f64) -> Vec3 {
    let (phi, theta) = (d.azimuth.to_radians(), d.elevation.to_radians());
    Vec3::new(
        r * theta.cos() * phi.cos(),
        r * theta.cos() * phi.sin(),
        r * theta.sin(),
    )
}

/// Inverse of [`sph_to_cart`]: returns the direction and radius.
pub fn cart_to_sph(v: Vec3) -> Option<(Direction, f64)> {
    Direction::from_vector(v).map(|d| (d, v.norm()))
}

const UNIT_TOLERANCE: f64 = 1e-6;

/// Great-circle angle between two unit vectors, in degrees.
pub fn angular_distance(u: Vec3, v: Vec3) -> Result<f64> {
    for w in [u, v] {
        if (w.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid(format!(
                "angular_distance expects unit vectors, got norm {}",
                w.norm()
            )));
        }
    }
    Ok(u.dot(v).clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Omnidirectional,
    Cardioid,
    Hypercardioid,
}

impl Pattern {
    /// Omnidirectional share `a` of the first-order pattern `a + (1 - a) cos θ`.
    pub fn omni_weight(self) -> f64 {
        match self {
            Pattern::Omnidirectional => 1.0,
            Pattern::Cardioid => 0.5,
            Pattern::Hypercardioid => 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSpec {
    /// Look direction; capsules sit at `offset_radius` along it from the array center.
    pub orientation: Direction,
    pub offset_radius: f64,
    pub pattern: Pattern,
}

impl CapsuleSpec {
    pub fn axis(&self) -> Vec3 {
        self.orientation.unit_vector()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicArray {
    pub center: Vec3,
    pub capsules: Vec<CapsuleSpec>,
}

/// Capsule angles (azimuth, elevation) of the tetrahedral array, M1..M4.
pub const TETRAHEDRAL_ANGLES: [(f64, f64); 4] =
    [(45.0, 35.0), (-45.0, -35.0), (135.0, -35.0), (-135.0, 35.0)];

/// Capsule distance from the array center, in meters.
pub const TETRAHEDRAL_RADIUS: f64 = 0.042;

impl MicArray {
    pub fn new(center: Vec3, capsules: Vec<CapsuleSpec>) -> Result<Self> {
        if capsules.is_empty() {
            return Err(Error::invalid("microphone array needs at least one capsule"));
        }
        if let Some(c) = capsules.iter().find(|c| !(c.offset_radius >= 0.0)) {
            return Err(Error::invalid(format!(
                "capsule offset radius must be >= 0, got {}",
                c.offset_radius
            )));
        }
        Ok(MicArray { center, capsules })
    }

    pub fn capsule_position(&self, index: usize) -> Vec3 {
        let c = &self.capsules[index];
        self.center + sph_to_cart(c.orientation, c.offset_radius)
    }

    pub fn capsule_positions(&self) -> Vec<Vec3> {
        (0..self.capsules.len())
            .map(|i| self.capsule_position(i))
            .collect()
    }

    pub fn with_center(&self, center: Vec3) -> MicArray {
        MicArray {
            center,
            capsules: self.capsules.clone(),
        }
    }
}

/// Four hypercardioid capsules pointing radially outward, 4.2 cm from `center`.
pub fn tetrahedral_array(center: Vec3) -> MicArray {
    let capsules = TETRAHEDRAL_ANGLES
        .iter()
        .map(|&(az, el)| CapsuleSpec {
            orientation: Direction::new(az, el),
            offset_radius: TETRAHEDRAL_RADIUS,
            pattern: Pattern::Hypercardioid,
        })
        .collect();
    MicArray { center, capsules }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrajectoryKind {
    /// Horizontal orbit at absolute height `height` around a vertical axis
    /// through the array center shifted by `center_offset` (x, y).
    Circular {
        radius: f64,
        height: f64,
        #[serde(default)]
        center_offset: [f64; 2],
    },
    /// Straight trace between two absolute room positions.
    Linear { start: Vec3, end: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub group: usize,
    pub height_index: usize,
    #[serde(flatten)]
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn circular(group: usize, height_index: usize, radius: f64, height: f64) -> Self {
        Trajectory {
            group,
            height_index,
            kind: TrajectoryKind::Circular {
                radius,
                height,
                center_offset: [0.0, 0.0],
            },
        }
    }

    pub fn linear(group: usize, height_index: usize, start: Vec3, end: Vec3) -> Self {
        Trajectory {
            group,
            height_index,
            kind: TrajectoryKind::Linear { start, end },
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.kind, TrajectoryKind::Circular { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            TrajectoryKind::Circular {
                radius,
                height,
                center_offset,
            } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid(format!(
                        "circular trajectory radius must be > 0, got {radius}"
                    )));
                }
                if !height.is_finite() || !center_offset.iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("circular trajectory has non-finite fields"));
                }
            }
            TrajectoryKind::Linear { start, end } => {
                if !start.is_finite() || !end.is_finite() {
                    return Err(Error::invalid("linear trajectory has non-finite endpoints"));
                }
                if start == end {
                    return Err(Error::invalid("linear trajectory start equals end"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub index: usize,
    pub position: Vec3,
    /// Unit vector from the array center toward `position`.
    pub doa: Vec3,
    /// Progress along the trace in degrees: orbit phase for circles, angle
    /// swept at the array center for segments.
    pub angle: f64,
}

fn make_sample(index: usize, position: Vec3, angle: f64, array_center: Vec3) -> Result<TrajectorySample> {
    let doa = (position - array_center).normalized().ok_or_else(|| {
        Error::invalid(format!(
            "trajectory sample {index} coincides with the array center"
        ))
    })?;
    Ok(TrajectorySample {
        index,
        position,
        doa,
        angle,
    })
}

fn subtended(a: Vec3, b: Vec3, center: Vec3) -> f64 {
    match ((a - center).normalized(), (b - center).normalized()) {
        (Some(u), Some(v)) => u.dot(v).clamp(-1.0, 1.0).acos().to_degrees(),
        _ => 180.0,
    }
}

/// Samples a trajectory so that consecutive points subtend at most `spacing`
/// degrees at the array center.
///
/// Circles start at orbit phase 0 and run counterclockwise over the full
/// orbit (the last sample does not repeat the first). Segments include both
/// endpoints and are sampled uniformly in the angle seen from the array.
pub fn sample_trajectory(
    traj: &Trajectory,
    array_center: Vec3,
    spacing: f64,
) -> Result<Vec<TrajectorySample>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(format!("spacing must be > 0, got {spacing}")));
    }
    traj.validate()?;
    match traj.kind {
        TrajectoryKind::Circular {
            radius,
            height,
            center_offset,
        } => {
            let axis_x = array_center.x + center_offset[0];
            let axis_y = array_center.y + center_offset[1];
            let point = |phase_deg: f64| {
                let p = phase_deg.to_radians();
                Vec3::new(axis_x + radius * p.cos(), axis_y + radius * p.sin(), height)
            };
            let mut count = (360.0 / spacing - 1e-9).ceil().max(1.0) as usize;
            // Off-axis orbits can subtend more than the phase step; refine until they don't.
            loop {
                let step = 360.0 / count as f64;
                let worst = (0..count)
                    .map(|k| subtended(point(k as f64 * step), point((k + 1) as f64 * step), array_center))
                    .fold(0.0, f64::max);
                if worst <= spacing + 1e-9 {
                    break;
                }
                count = ((count as f64 * worst / spacing).ceil() as usize).max(count + 1);
            }
            let step = 360.0 / count as f64;
            (0..count)
                .map(|k| {
                    let phase = k as f64 * step;
                    make_sample(k, point(phase), phase, array_center)
                })
                .collect()
        }
        TrajectoryKind::Linear { start, end } => {
            let a = start - array_center;
            let b = end - array_center;
            let dir = end - start;
            // Distance from the array center to the segment.
            let s0 = (-a.dot(dir) / dir.dot(dir)).clamp(0.0, 1.0);
            if (a + dir * s0).norm() < 1e-9 {
                return Err(Error::invalid(
                    "linear trajectory passes through the array center",
                ));
            }
            let u = a.normalized().expect("nonzero, checked above");
            let total = subtended(start, end, array_center);
            let intervals = if total < 1e-12 {
                1
            } else {
                (total / spacing - 1e-9).ceil().max(1.0) as usize
            };
            let w = (b - u * b.dot(u)).normalized();
            let mut samples = Vec::with_capacity(intervals + 1);
            for k in 0..=intervals {
                let theta_deg = total * k as f64 / intervals as f64;
                let position = if k == 0 {
                    start
                } else if k == intervals {
                    end
                } else {
                    // Point on the segment whose direction makes angle theta with `start`.
                    let w = w.expect("nonzero sweep implies an in-plane normal");
                    let theta = theta_deg.to_radians();
                    let n = u * theta.sin() - w * theta.cos();
                    let s = -a.dot(n) / dir.dot(n);
                    start + dir * s
                };
                samples.push(make_sample(k, position, theta_deg, array_center)?);
            }
            Ok(samples)
        }
    }
}

/// Result of snapping a DoA ray onto a circular trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderProjection {
    pub point: Vec3,
    /// |z - height| of the raw ray/cylinder intersection before snapping.
    pub z_residual: f64,
}

/// Intersects the ray `array_center + t·doa` (t > 0) with the vertical
/// cylinder of `radius` around the array center, then snaps z to `height`.
pub fn project_doa_circular(
    doa: Vec3,
    array_center: Vec3,
    radius: f64,
    height: f64,
) -> Result<CylinderProjection> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius must be > 0, got {radius}")));
    }
    let horizontal = (doa.x * doa.x + doa.y * doa.y).sqrt();
    if horizontal < 1e-12 {
        return Err(Error::NoIntersection);
    }
    let t = radius / horizontal;
    let raw = array_center + doa * t;
    Ok(CylinderProjection {
        point: Vec3::new(raw.x, raw.y, height),
        z_residual: (raw.z - height).abs(),
    })
}

/// Point on segment `[start, end]` closest to the ray `origin + t·dir`, t >= 0.
pub fn project_doa_linear(doa: Vec3, array_center: Vec3, segment: (Vec3, Vec3)) -> Vec3 {
    let (start, end) = segment;
    let d1 = doa;
    let d2 = end - start;
    let r = array_center - start;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    if e <= f64::EPSILON {
        return start;
    }
    if a <= f64::EPSILON {
        return start + d2 * (r.dot(d2) / e).clamp(0.0, 1.0);
    }
    let b = d1.dot(d2);
    let c = d1.dot(r);
    let f = d2.dot(r);
    let denom = a * e - b * b;

    let mut s = if denom > 1e-12 * a * e {
        ((a * f - b * c) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let t = (s * b - c) / a;
    if t < 0.0 {
        s = (f / e).clamp(0.0, 1.0);
    }
    start + d2 * s
}

/// Distance from `point` to the ray `origin + t·dir`, t >= 0.
pub fn ray_point_distance(origin: Vec3, dir: Vec3, point: Vec3) -> f64 {
    let t = ((point - origin).dot(dir) / dir.dot(dir)).max(0.0);
    (origin + dir * t).distance(point)
}

/// Wraps an angle in degrees into [-180, 180).
pub fn wrap_degrees(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}
