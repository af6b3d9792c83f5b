//! Planar homography estimation and ground/image projection.
//!
//! A [`Homography`] maps homogeneous ground-plane coordinates to image
//! coordinates, `q ~ H Q`. Estimation uses the normalized direct linear
//! transform: both point sets are centered and isotropically scaled to mean
//! distance sqrt(2) before the 2n x 9 design matrix is assembled, and the
//! solution is the right singular vector of the smallest singular value.
//! Every matrix is kept in a canonical form (unit Frobenius norm, downstream
//! sign fixed) so equality is meaningful despite the projective scale freedom.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rank-deficiency threshold for the DLT design matrix: the ratio of the
/// 8th-largest to the largest singular value must exceed this or the solve
/// is underdetermined (some 3 ground points collinear).
const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Minimum |det| for an invertible canonical homography.
const SINGULARITY_TOLERANCE: f64 = 1e-12;

/// Minimum magnitude of the projective denominator `h31*x + h32*y + h33`.
const DENOMINATOR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("need at least 4 point correspondences, got {0}")]
    TooFewPairs(usize),
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("degenerate point configuration: design matrix is rank-deficient")]
    DegenerateConfiguration,
    #[error("homography matrix is singular")]
    SingularMatrix,
    #[error("point maps to the line at infinity")]
    PointAtInfinity,
}

/// A point on the image plane, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2Image {
    pub u: f64,
    pub v: f64,
}

impl Point2Image {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// A point on the ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2Ground {
    pub x: f64,
    pub y: f64,
}

impl Point2Ground {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One calibration pair: a ground point and where it appears in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub ground: Point2Ground,
    pub image: Point2Image,
}

impl Correspondence {
    pub fn new(ground: Point2Ground, image: Point2Image) -> Self {
        Self { ground, image }
    }
}

/// A 3x3 invertible plane-to-plane projective map in canonical form:
/// unit Frobenius norm, sign chosen so `h33 >= 0` (first non-zero entry
/// positive when `h33 == 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    h: [[f64; 3]; 3],
}

impl Homography {
    /// Builds a homography from row-major entries, normalizing to canonical
    /// form. Fails if any entry is non-finite or the matrix is singular.
    pub fn from_entries(entries: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        if entries.iter().flatten().any(|e| !e.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let norm: f64 = entries.iter().flatten().map(|e| e * e).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(GeometryError::SingularMatrix);
        }
        let canonical = canonicalize(entries, norm);
        let det = Matrix3::from_fn(|r, c| canonical[r][c]).determinant();
        if !(det.abs() > SINGULARITY_TOLERANCE) {
            return Err(GeometryError::SingularMatrix);
        }
        Ok(Self { h: canonical })
    }

    /// Row-major entries `[h1*, h2*, h3*]` flattened to 9 values.
    pub fn to_row_major(&self) -> [f64; 9] {
        [
            self.h[0][0],
            self.h[0][1],
            self.h[0][2],
            self.h[1][0],
            self.h[1][1],
            self.h[1][2],
            self.h[2][0],
            self.h[2][1],
            self.h[2][2],
        ]
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self, GeometryError> {
        Self::from_entries([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn identity() -> Self {
        Self::from_entries([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            .expect("identity is invertible")
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.h[row][col]
    }

    /// The inverse map, re-normalized to canonical form.
    pub fn invert(&self) -> Result<Homography, GeometryError> {
        let m = Matrix3::from_fn(|r, c| self.h[r][c]);
        let inv = m.try_inverse().ok_or(GeometryError::SingularMatrix)?;
        Homography::from_entries([
            [inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]],
            [inv[(1, 0)], inv[(1, 1)], inv[(1, 2)]],
            [inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]],
        ])
    }

    /// Projects a ground point to the image plane:
    /// `u = (h11 x + h12 y + h13) / w`, `v = (h21 x + h22 y + h23) / w`
    /// with `w = h31 x + h32 y + h33`.
    pub fn project(&self, p: Point2Ground) -> Result<Point2Image, GeometryError> {
        let h = &self.h;
        let w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
        if w.abs() <= DENOMINATOR_TOLERANCE {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok(Point2Image::new(
            (h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w,
            (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w,
        ))
    }

    /// Projects an image point back to the ground plane through the inverse
    /// map. When projecting many points, invert once and use [`project`]
    /// on the inverse instead.
    ///
    /// [`project`]: Homography::project
    pub fn project_image_to_ground(&self, q: Point2Image) -> Result<Point2Ground, GeometryError> {
        let inv = self.invert()?;
        let p = inv.project(Point2Ground::new(q.u, q.v))?;
        Ok(Point2Ground::new(p.u, p.v))
    }
}

/// Scales to unit Frobenius norm and fixes the sign (h33 >= 0; when h33 is
/// exactly zero, the first non-zero entry in row-major order is positive).
/// `norm` is the precomputed Frobenius norm, positive and finite.
fn canonicalize(h: [[f64; 3]; 3], norm: f64) -> [[f64; 3]; 3] {
    let mut sign = if h[2][2] > 0.0 {
        1.0
    } else if h[2][2] < 0.0 {
        -1.0
    } else {
        0.0
    };
    if sign == 0.0 {
        sign = h
            .iter()
            .flatten()
            .find(|e| **e != 0.0)
            .map(|e| e.signum())
            .unwrap_or(1.0);
    }
    let scale = sign / norm;
    let mut out = h;
    for row in &mut out {
        for e in row {
            *e *= scale;
        }
    }
    out
}

/// Similarity transform that centers points at the origin and scales them to
/// mean distance sqrt(2). Returns `None` when all points coincide.
fn normalizing_transform(points: &[(f64, f64)]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (cx, cy) = (cx / n, cy / n);
    let mean_dist = points
        .iter()
        .map(|(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= f64::EPSILON {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Estimates the homography mapping ground points to image points from at
/// least 4 correspondences (no 3 ground points collinear). With exactly 4
/// non-degenerate pairs the result interpolates them exactly; with more it
/// minimizes the algebraic DLT residual.
pub fn solve_homography(pairs: &[Correspondence]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPairs(pairs.len()));
    }
    if pairs
        .iter()
        .any(|c| !c.ground.is_finite() || !c.image.is_finite())
    {
        return Err(GeometryError::NonFinite);
    }

    let ground: Vec<(f64, f64)> = pairs.iter().map(|c| (c.ground.x, c.ground.y)).collect();
    let image: Vec<(f64, f64)> = pairs.iter().map(|c| (c.image.u, c.image.v)).collect();
    let t_ground =
        normalizing_transform(&ground).ok_or(GeometryError::DegenerateConfiguration)?;
    let t_image = normalizing_transform(&image).ok_or(GeometryError::DegenerateConfiguration)?;

    let n = pairs.len();
    // Pad to at least 9 rows so the thin SVD still exposes the null vector.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let g = t_ground * Vector3::new(c.ground.x, c.ground.y, 1.0);
        let q = t_image * Vector3::new(c.image.u, c.image.v, 1.0);
        let (x, y) = (g.x / g.z, g.y / g.z);
        let (u, v) = (q.x / q.z, q.y / q.z);

        let r0 = 2 * i;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;

        let r1 = 2 * i + 1;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(true, true);
    let v_t = svd.v_t.as_ref().ok_or(GeometryError::DegenerateConfiguration)?;
    let sv = &svd.singular_values;

    // Select singular values by scan rather than trusting sort order.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let largest = sv[order[0]];
    // A unique solution needs rank 8: the 8th singular value must be
    // well separated from zero relative to the largest.
    if largest <= 0.0 || sv[order[7]] / largest < DEGENERACY_TOLERANCE {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let null_idx = order[8];

    let hn = Matrix3::new(
        v_t[(null_idx, 0)],
        v_t[(null_idx, 1)],
        v_t[(null_idx, 2)],
        v_t[(null_idx, 3)],
        v_t[(null_idx, 4)],
        v_t[(null_idx, 5)],
        v_t[(null_idx, 6)],
        v_t[(null_idx, 7)],
        v_t[(null_idx, 8)],
    );

    let t_image_inv = t_image
        .try_inverse()
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let h = t_image_inv * hn * t_ground;

    Homography::from_entries([
        [h[(0, 0)], h[(0, 1)], h[(0, 2)]],
        [h[(1, 0)], h[(1, 1)], h[(1, 2)]],
        [h[(2, 0)], h[(2, 1)], h[(2, 2)]],
    ])
    .map_err(|_| GeometryError::DegenerateConfiguration)
}

/// Parses a calibration correspondence CSV with header
/// `ground_x,ground_y,image_u,image_v`, one pair per row.
pub fn parse_pairs_csv(text: &str) -> Result<Vec<Correspondence>, PairsCsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(PairsCsvError::Empty)?;
    let header: Vec<&str> = header.split(',').map(str::trim).collect();
    if header != ["ground_x", "ground_y", "image_u", "image_v"] {
        return Err(PairsCsvError::BadHeader);
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(PairsCsvError::BadRow { line: idx + 1 });
        }
        let mut values = [0.0; 4];
        for (v, f) in values.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .map_err(|_| PairsCsvError::BadRow { line: idx + 1 })?;
            if !v.is_finite() {
                return Err(PairsCsvError::BadRow { line: idx + 1 });
            }
        }
        pairs.push(Correspondence::new(
            Point2Ground::new(values[0], values[1]),
            Point2Image::new(values[2], values[3]),
        ));
    }
    Ok(pairs)
}

#[derive(Debug, Error, PartialEq)]
pub enum PairsCsvError {
    #[error("empty correspondence file")]
    Empty,
    #[error("expected header `ground_x,ground_y,image_u,image_v`")]
    BadHeader,
    #[error("malformed correspondence row at line {line}")]
    BadRow { line: usize },
}
