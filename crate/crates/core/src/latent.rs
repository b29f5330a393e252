//! Latent spaces and samplers for the latent law.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LmsError, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::{kind_rng, StreamKind};

/// Rejection samplers give up after this many draws per requested point.
const MAX_REJECTIONS_PER_POINT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LatentSpace {
    /// Atoms `0..m` with the given probabilities (uniform when omitted).
    Discrete {
        m: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
    },
    /// Ring torus in ℝ³ around the z axis.
    TorusR3 {
        major_radius: f64,
        minor_radius: f64,
    },
    /// Unit sphere in ℝ^ambient_dim.
    Sphere { ambient_dim: usize },
    PlanarRegion { region: Region },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Annulus {
        #[serde(default)]
        center: [f64; 2],
        inner_radius: f64,
        outer_radius: f64,
    },
    /// Simple polygon, optionally with polygonal holes.
    Polygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        holes: Vec<Vec<[f64; 2]>>,
    },
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Region::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                r >= *inner_radius && r <= *outer_radius
            }
            Region::Polygon { vertices, holes } => {
                point_in_polygon(vertices, p) && !holes.iter().any(|h| point_in_polygon(h, p))
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Region::Annulus {
                center,
                outer_radius,
                ..
            } => (
                [center[0] - outer_radius, center[1] - outer_radius],
                [center[0] + outer_radius, center[1] + outer_radius],
            ),
            Region::Polygon { vertices, .. } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => PI * (outer_radius * outer_radius - inner_radius * inner_radius),
            Region::Polygon { vertices, holes } => {
                shoelace(vertices).abs() - holes.iter().map(|h| shoelace(h).abs()).sum::<f64>()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let ok = center.iter().all(|c| c.is_finite())
                    && *inner_radius >= 0.0
                    && outer_radius.is_finite()
                    && outer_radius > inner_radius;
                if !ok {
                    return Err(LmsError::InvalidArgument(format!(
                        "annulus radii {inner_radius}, {outer_radius}"
                    )));
                }
            }
            Region::Polygon { vertices, holes } => {
                for poly in std::iter::once(vertices).chain(holes) {
                    if poly.len() < 3 || poly.iter().flatten().any(|c| !c.is_finite()) {
                        return Err(LmsError::InvalidArgument(
                            "polygon needs at least 3 finite vertices".into(),
                        ));
                    }
                    if shoelace(poly).abs() < 1e-12 {
                        return Err(LmsError::InvalidArgument("degenerate polygon".into()));
                    }
                }
                if self.area() <= 0.0 {
                    return Err(LmsError::InvalidArgument("holes cover the polygon".into()));
                }
            }
        }
        Ok(())
    }
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Even-odd rule.
fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl LatentSpace {
    pub fn discrete_uniform(m: usize) -> Self {
        LatentSpace::Discrete { m, probs: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentSpace::Discrete { m, probs } => {
                if *m == 0 {
                    return Err(LmsError::InvalidArgument("discrete space with no atoms".into()));
                }
                if let Some(p) = probs {
                    if p.len() != *m {
                        return Err(LmsError::InvalidArgument(format!(
                            "{} probabilities for {m} atoms",
                            p.len()
                        )));
                    }
                    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                        return Err(LmsError::InvalidArgument("negative probability".into()));
                    }
                    let s: f64 = p.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return Err(LmsError::InvalidArgument(format!(
                            "probabilities sum to {s}"
                        )));
                    }
                }
            }
            LatentSpace::TorusR3 {
                major_radius,
                minor_radius,
            } => {
                if !(*major_radius > 0.0 && *minor_radius > 0.0)
                    || !major_radius.is_finite()
                    || !minor_radius.is_finite()
                {
                    return Err(LmsError::InvalidArgument("torus radii must be positive".into()));
                }
            }
            LatentSpace::Sphere { ambient_dim } => {
                if *ambient_dim < 2 {
                    return Err(LmsError::InvalidArgument(
                        "sphere needs ambient dimension at least 2".into(),
                    ));
                }
            }
            LatentSpace::PlanarRegion { region } => region.validate()?,
        }
        Ok(())
    }

    /// Coordinates per point; 0 for discrete spaces.
    pub fn ambient_dim(&self) -> usize {
        match self {
            LatentSpace::Discrete { .. } => 0,
            LatentSpace::TorusR3 { .. } => 3,
            LatentSpace::Sphere { ambient_dim } => *ambient_dim,
            LatentSpace::PlanarRegion { .. } => 2,
        }
    }

    /// Atom probabilities of a discrete space.
    pub fn probs(&self) -> Option<Vec<f64>> {
        match self {
            LatentSpace::Discrete { m, probs } => Some(
                probs
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / *m as f64; *m]),
            ),
            _ => None,
        }
    }

    /// Distance between two points of the space, for constraint checks.
    pub fn constraint_residual(&self, z: &[f64]) -> f64 {
        match self {
            LatentSpace::Discrete { .. } => 0.0,
            LatentSpace::TorusR3 {
                major_radius,
                minor_radius,
            } => {
                let rho = z[0].hypot(z[1]);
                ((rho - major_radius).powi(2) + z[2] * z[2]).sqrt() - minor_radius
            }
            LatentSpace::Sphere { .. } => norm(z) - 1.0,
            LatentSpace::PlanarRegion { region } => {
                if region.contains([z[0], z[1]]) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPoints {
    Atoms(Vec<usize>),
    Coords(Matrix),
}

/// A borrowed latent point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentPoint<'a> {
    Atom(usize),
    Coord(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub points: LatentPoints,
    pub space: LatentSpace,
    pub seed: u64,
}

impl LatentSample {
    pub fn len(&self) -> usize {
        match &self.points {
            LatentPoints::Atoms(a) => a.len(),
            LatentPoints::Coords(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> LatentPoint<'_> {
        match &self.points {
            LatentPoints::Atoms(a) => LatentPoint::Atom(a[i]),
            LatentPoints::Coords(m) => LatentPoint::Coord(m.row(i)),
        }
    }

    pub fn coords(&self) -> Option<&Matrix> {
        match &self.points {
            LatentPoints::Coords(m) => Some(m),
            LatentPoints::Atoms(_) => None,
        }
    }

    pub fn atoms(&self) -> Option<&[usize]> {
        match &self.points {
            LatentPoints::Atoms(a) => Some(a),
            LatentPoints::Coords(_) => None,
        }
    }

    /// Wraps user-supplied coordinates without sampling.
    pub fn from_coords(space: LatentSpace, coords: Matrix) -> Result<Self> {
        space.validate()?;
        if matches!(space, LatentSpace::Discrete { .. }) || coords.cols() != space.ambient_dim() {
            return Err(LmsError::Shape(format!(
                "{} coordinates per point for a space of dimension {}",
                coords.cols(),
                space.ambient_dim()
            )));
        }
        Ok(LatentSample {
            points: LatentPoints::Coords(coords),
            space,
            seed: 0,
        })
    }

    pub fn from_atoms(space: LatentSpace, atoms: Vec<usize>) -> Result<Self> {
        space.validate()?;
        match space {
            LatentSpace::Discrete { m, .. } if atoms.iter().all(|&a| a < m) => Ok(LatentSample {
                points: LatentPoints::Atoms(atoms),
                space,
                seed: 0,
            }),
            _ => Err(LmsError::InvalidArgument(
                "atoms need a discrete space and must be in range".into(),
            )),
        }
    }

    /// For discrete spaces, every atom once; otherwise the sample itself.
    pub fn atom_support(&self) -> LatentSample {
        match &self.space {
            LatentSpace::Discrete { m, .. } => LatentSample {
                points: LatentPoints::Atoms((0..*m).collect()),
                space: self.space.clone(),
                seed: self.seed,
            },
            _ => self.clone(),
        }
    }

    /// Rows selected by index.
    pub fn select(&self, idx: &[usize]) -> LatentSample {
        let points = match &self.points {
            LatentPoints::Atoms(a) => LatentPoints::Atoms(idx.iter().map(|&i| a[i]).collect()),
            LatentPoints::Coords(m) => LatentPoints::Coords(m.select_rows(idx)),
        };
        LatentSample {
            points,
            space: self.space.clone(),
            seed: self.seed,
        }
    }

    /// CSV with columns `z1..zd`, or `atom` for discrete samples.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        match &self.points {
            LatentPoints::Atoms(a) => {
                out.write_record(["atom"])?;
                for v in a {
                    out.write_record([v.to_string()])?;
                }
            }
            LatentPoints::Coords(m) => {
                out.write_record((1..=m.cols()).map(|k| format!("z{k}")))?;
                for r in m.row_iter() {
                    out.write_record(r.iter().map(|v| v.to_string()))?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Draws `n` i.i.d. points from the uniform law on `space` (or the given
/// atom probabilities).
pub fn sample(space: &LatentSpace, n: usize, seed: u64) -> Result<LatentSample> {
    space.validate()?;
    if n == 0 {
        return Err(LmsError::InvalidArgument("sample size must be positive".into()));
    }
    let mut rng = kind_rng(seed, StreamKind::Latent, 0);
    let points = match space {
        LatentSpace::Discrete { .. } => {
            let probs = space.probs().expect("discrete");
            let mut cdf = Vec::with_capacity(probs.len());
            let mut acc = 0.0;
            for p in &probs {
                acc += p;
                cdf.push(acc);
            }
            let last_positive = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            let atoms = (0..n)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * acc;
                    cdf.iter()
                        .position(|&c| u < c)
                        .unwrap_or(last_positive)
                })
                .collect();
            LatentPoints::Atoms(atoms)
        }
        LatentSpace::TorusR3 {
            major_radius,
            minor_radius,
        } => {
            let (rr, r) = (*major_radius, *minor_radius);
            let mut m = Matrix::zeros(n, 3);
            for i in 0..n {
                let mut tries = 0;
                let theta = loop {
                    let th = rng.random_range(0.0..2.0 * PI);
                    let u: f64 = rng.random();
                    if u * (rr + r) <= (rr + r * th.cos()).abs() {
                        break th;
                    }
                    tries += 1;
                    if tries > MAX_REJECTIONS_PER_POINT {
                        return Err(LmsError::InvalidArgument("torus rejection stalled".into()));
                    }
                };
                let phi = rng.random_range(0.0..2.0 * PI);
                m.row_mut(i).copy_from_slice(&torus_point(rr, r, phi, theta));
            }
            LatentPoints::Coords(m)
        }
        LatentSpace::Sphere { ambient_dim } => {
            let d = *ambient_dim;
            let mut m = Matrix::zeros(n, d);
            for i in 0..n {
                loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let nv = norm(&v);
                    if nv > 1e-12 {
                        for (o, x) in m.row_mut(i).iter_mut().zip(&v) {
                            *o = x / nv;
                        }
                        break;
                    }
                }
            }
            LatentPoints::Coords(m)
        }
        LatentSpace::PlanarRegion { region } => {
            let (lo, hi) = region.bounding_box();
            let mut m = Matrix::zeros(n, 2);
            for i in 0..n {
                let mut tries = 0;
                loop {
                    let p = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
                    if region.contains(p) {
                        m.row_mut(i).copy_from_slice(&p);
                        break;
                    }
                    tries += 1;
                    if tries > MAX_REJECTIONS_PER_POINT {
                        return Err(LmsError::InvalidArgument("region rejection stalled".into()));
                    }
                }
            }
            LatentPoints::Coords(m)
        }
    };
    Ok(LatentSample {
        points,
        space: space.clone(),
        seed,
    })
}

/// Ambient coordinates of the torus point at azimuth `phi`, elevation `theta`.
pub fn torus_point(major: f64, minor: f64, phi: f64, theta: f64) -> [f64; 3] {
    let rho = major + minor * theta.cos();
    [rho * phi.cos(), rho * phi.sin(), minor * theta.sin()]
}

/// Azimuth (around the z axis) and elevation (around the tube) of each point.
pub fn torus_angles(sample: &LatentSample) -> Result<(Vec<f64>, Vec<f64>)> {
    let (LatentSpace::TorusR3 { major_radius, .. }, LatentPoints::Coords(m)) =
        (&sample.space, &sample.points)
    else {
        return Err(LmsError::InvalidArgument("torus angles need a torus sample".into()));
    };
    let mut az = Vec::with_capacity(m.rows());
    let mut el = Vec::with_capacity(m.rows());
    for r in m.row_iter() {
        az.push(r[1].atan2(r[0]));
        el.push(r[2].atan2(r[0].hypot(r[1]) - major_radius));
    }
    Ok((az, el))
}

/// 0 if the atoms are equal, 1 otherwise.
pub fn discrete_metric(i: usize, j: usize) -> f64 {
    if i == j {
        0.0
    } else {
        1.0
    }
}
