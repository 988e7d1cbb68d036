//! Knot geometry: closed curves parametrized by `s` in `[0, 1)`, plane
//! diagrams, and a small zoo of standard knots and links.

mod diagram;
mod io;

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use diagram::{
    almost_planar, almost_planar_with, combinatorial_linking, extract_crossings, projection_basis, writhe, Crossing,
    CrossingState, PlaneDiagram,
};
pub use io::{data_file, load_knot, named_knot, KnotSpec};

pub type V3 = Vector3<f64>;

/// A closed curve `[0, 1) -> R^3` with its derivative in `s`.
pub trait Curve: Send + Sync {
    fn point(&self, s: f64) -> V3;
    fn tangent(&self, s: f64) -> V3;

    /// Number of straight segments for polygons, which crossing search
    /// samples at their vertices.
    fn segments(&self) -> Option<usize> {
        None
    }

    /// Largest distance from the centroid of 256 samples.
    fn radius(&self) -> f64 {
        let pts: Vec<V3> = (0..256).map(|i| self.point(i as f64 / 256.0)).collect();
        let c = pts.iter().sum::<V3>() / pts.len() as f64;
        pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Circle { center: V3, radius: f64, e1: V3, e2: V3 },
    Torus { p: i64, q: i64, big: f64, small: f64, phi0: f64, psi0: f64 },
    Figure8,
    Perturbed { base: Box<ParametricKnot>, amplitude: f64, harmonics: Vec<(V3, V3)> },
    Rigid { base: Box<ParametricKnot>, rotation: Matrix3<f64>, shift: V3 },
    Reparam { base: Box<ParametricKnot>, offset: f64, reversed: bool },
    AlmostPlanar { base: Box<ParametricKnot>, dir: V3, bumps: Vec<(f64, f64)>, width: f64 },
}

/// A smooth closed curve given in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricKnot {
    name: String,
    shape: Shape,
}

fn wrap(s: f64) -> f64 {
    s.rem_euclid(1.0)
}

/// Signed distance from `s` to `c` on the circle `R/Z`, in `[-1/2, 1/2)`.
fn circle_offset(s: f64, c: f64) -> f64 {
    (s - c + 0.5).rem_euclid(1.0) - 0.5
}

/// `(1 - u^2)^2` on `|u| < 1`, and its derivative.
fn bump(u: f64) -> (f64, f64) {
    if u.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let a = 1.0 - u * u;
        (a * a, -4.0 * u * a)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl ParametricKnot {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Round circle; `normal` fixes its plane and the direction of travel.
    pub fn circle(center: V3, radius: f64, normal: V3) -> Result<Self> {
        if radius <= 0.0 || normal.norm() == 0.0 {
            return Err(Error::Parameter("circle needs a positive radius and a nonzero normal".into()));
        }
        let n = normal.normalize();
        let seed = if n.x.abs() < 0.9 { V3::x() } else { V3::y() };
        let e1 = (seed - n * n.dot(&seed)).normalize();
        let e2 = n.cross(&e1);
        Ok(ParametricKnot { name: "circle".into(), shape: Shape::Circle { center, radius, e1, e2 } })
    }

    /// Unit circle in the xy-plane, counterclockwise seen from +z.
    pub fn unknot() -> Self {
        ParametricKnot { name: "unknot".into(), ..Self::circle(V3::zeros(), 1.0, V3::z()).unwrap() }
    }

    /// `((R + r cos qt) cos pt, (R + r cos qt) sin pt, r sin qt)` with `t = 2 pi s`,
    /// `R = 2`, `r = 1`.
    pub fn torus(p: i64, q: i64) -> Result<Self> {
        if p == 0 || q == 0 || gcd(p, q) != 1 {
            return Err(Error::Parameter(format!("torus({p},{q}) is not a knot; use torus_link for several components")));
        }
        Ok(ParametricKnot {
            name: format!("torus({p},{q})"),
            shape: Shape::Torus { p, q, big: 2.0, small: 1.0, phi0: 0.0, psi0: 0.0 },
        })
    }

    /// The (2,3) torus knot.
    pub fn trefoil() -> Self {
        ParametricKnot { name: "trefoil".into(), ..Self::torus(2, 3).unwrap() }
    }

    /// `((2 + cos 2u) cos 3u, (2 + cos 2u) sin 3u, sin 4u)` with `u = 2 pi s`.
    pub fn figure8() -> Self {
        ParametricKnot { name: "figure8".into(), shape: Shape::Figure8 }
    }

    /// Component `j` of the torus link `T(p, q)`, which has `gcd(p, q)` components.
    pub fn torus_link(p: i64, q: i64, j: i64) -> Result<Self> {
        let g = gcd(p, q);
        if p == 0 || q == 0 || !(0..g).contains(&j) {
            return Err(Error::Parameter(format!("torus link ({p},{q}) has no component {j}")));
        }
        let (pp, qq) = (p / g, q / g);
        // a*qq - b*pp = 1 places the components on parallel lines of the torus.
        let (a, b) = (0..pp.abs().max(1) * 2 + 2)
            .flat_map(|a| [a, -a])
            .find_map(|a| {
                let r = a * qq - 1;
                (r % pp == 0).then(|| (a, r / pp))
            })
            .expect("coprime");
        let (phi0, psi0) = (TAU * (j * a) as f64 / g as f64, TAU * (j * b) as f64 / g as f64);
        Ok(ParametricKnot {
            name: format!("torus_link({p},{q})[{j}]"),
            shape: Shape::Torus { p: pp, q: qq, big: 2.0, small: 1.0, phi0, psi0 },
        })
    }

    /// The two components of a Hopf link: unit circles in the xy-plane at the
    /// origin and in the xz-plane centred at `(1, 0, 0)`.
    pub fn hopf() -> (Self, Self) {
        let a = Self::circle(V3::zeros(), 1.0, V3::z()).unwrap();
        let b = Self::circle(V3::new(1.0, 0.0, 0.0), 1.0, V3::y()).unwrap();
        (ParametricKnot { name: "hopf_a".into(), ..a }, ParametricKnot { name: "hopf_b".into(), ..b })
    }

    pub fn rigid(&self, rotation: Matrix3<f64>, shift: V3) -> Self {
        ParametricKnot { name: self.name.clone(), shape: Shape::Rigid { base: Box::new(self.clone()), rotation, shift } }
    }

    /// `s -> offset + s`, or `offset - s` when `reversed`.
    pub fn reparametrized(&self, offset: f64, reversed: bool) -> Self {
        ParametricKnot { name: self.name.clone(), shape: Shape::Reparam { base: Box::new(self.clone()), offset, reversed } }
    }

    /// Sample `m` points as the vertices of a polygon.
    pub fn to_polygon(&self, m: usize) -> Result<PolygonalKnot> {
        PolygonalKnot::new((0..m).map(|i| self.point(i as f64 / m as f64)).collect())
    }
}

impl Curve for ParametricKnot {
    fn point(&self, s: f64) -> V3 {
        match &self.shape {
            Shape::Circle { center, radius, e1, e2 } => {
                let t = TAU * s;
                center + (e1 * t.cos() + e2 * t.sin()) * *radius
            }
            &Shape::Torus { p, q, big, small, phi0, psi0 } => {
                let (phi, psi) = (TAU * p as f64 * s + phi0, TAU * q as f64 * s + psi0);
                let rho = big + small * psi.cos();
                V3::new(rho * phi.cos(), rho * phi.sin(), small * psi.sin())
            }
            Shape::Figure8 => {
                let u = TAU * s;
                let rho = 2.0 + (2.0 * u).cos();
                V3::new(rho * (3.0 * u).cos(), rho * (3.0 * u).sin(), (4.0 * u).sin())
            }
            Shape::Perturbed { base, amplitude, harmonics } => {
                let mut x = base.point(s);
                for (j, (a, b)) in harmonics.iter().enumerate() {
                    let t = TAU * (j + 1) as f64 * s;
                    x += (a * t.cos() + b * t.sin()) * *amplitude;
                }
                x
            }
            Shape::Rigid { base, rotation, shift } => rotation * base.point(s) + shift,
            Shape::Reparam { base, offset, reversed } => {
                base.point(wrap(if *reversed { offset - s } else { offset + s }))
            }
            Shape::AlmostPlanar { base, dir, bumps, width } => {
                let x = base.point(s);
                let h: f64 = bumps.iter().map(|&(c, h)| h * bump(circle_offset(s, c) / width).0).sum();
                x - dir * dir.dot(&x) + dir * h
            }
        }
    }

    fn tangent(&self, s: f64) -> V3 {
        match &self.shape {
            Shape::Circle { radius, e1, e2, .. } => {
                let t = TAU * s;
                (e2 * t.cos() - e1 * t.sin()) * (TAU * radius)
            }
            &Shape::Torus { p, q, big, small, phi0, psi0 } => {
                let (pf, qf) = (p as f64, q as f64);
                let (phi, psi) = (TAU * pf * s + phi0, TAU * qf * s + psi0);
                let rho = big + small * psi.cos();
                let drho = -small * qf * psi.sin();
                V3::new(
                    drho * phi.cos() - rho * pf * phi.sin(),
                    drho * phi.sin() + rho * pf * phi.cos(),
                    small * qf * psi.cos(),
                ) * TAU
            }
            Shape::Figure8 => {
                let u = TAU * s;
                let rho = 2.0 + (2.0 * u).cos();
                let drho = -2.0 * (2.0 * u).sin();
                V3::new(
                    drho * (3.0 * u).cos() - 3.0 * rho * (3.0 * u).sin(),
                    drho * (3.0 * u).sin() + 3.0 * rho * (3.0 * u).cos(),
                    4.0 * (4.0 * u).cos(),
                ) * TAU
            }
            Shape::Perturbed { base, amplitude, harmonics } => {
                let mut v = base.tangent(s);
                for (j, (a, b)) in harmonics.iter().enumerate() {
                    let w = TAU * (j + 1) as f64;
                    let t = w * s;
                    v += (b * t.cos() - a * t.sin()) * (w * amplitude);
                }
                v
            }
            Shape::Rigid { base, rotation, .. } => rotation * base.tangent(s),
            Shape::Reparam { base, offset, reversed } => {
                if *reversed {
                    -base.tangent(wrap(offset - s))
                } else {
                    base.tangent(wrap(offset + s))
                }
            }
            Shape::AlmostPlanar { base, dir, bumps, width } => {
                let v = base.tangent(s);
                let dh: f64 = bumps.iter().map(|&(c, h)| h * bump(circle_offset(s, c) / width).1 / width).sum();
                v - dir * dir.dot(&v) + dir * dh
            }
        }
    }
}

/// Add a smooth perturbation `amplitude * sum_j (a_j cos 2 pi j s + b_j sin 2 pi j s)`,
/// `j = 1..=3`, with coefficients drawn from `seed`.
pub fn perturb(k: &ParametricKnot, amplitude: f64, seed: u64) -> Result<ParametricKnot> {
    if amplitude == 0.0 {
        return Ok(k.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeff = |j: f64| V3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / j;
    let harmonics = (1..=3).map(|j| (coeff(j as f64), coeff(j as f64))).collect();
    let out = ParametricKnot {
        name: format!("{}+perturbed", k.name),
        shape: Shape::Perturbed { base: Box::new(k.clone()), amplitude, harmonics },
    };
    let before = min_self_distance(k, 600);
    let after = min_self_distance(&out, 600);
    if after < 0.5 * before || after < 1e-3 * out.radius() {
        return Err(Error::Parameter(format!("amplitude {amplitude} brings the knot within {after:.3e} of itself")));
    }
    Ok(out)
}

/// Smallest distance between samples at least 1/20 apart in parameter.
pub fn min_self_distance(k: &dyn Curve, n: usize) -> f64 {
    let pts: Vec<V3> = (0..n).map(|i| k.point(i as f64 / n as f64)).collect();
    let gap = n / 20;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + gap..n {
            if j - i <= n - gap {
                best = best.min((pts[i] - pts[j]).norm());
            }
        }
    }
    best
}

/// Spot-check embeddedness: nonzero derivative and no near self-contact on a grid.
pub fn check_embedding(k: &dyn Curve, n: usize, tol: f64) -> Result<()> {
    for i in 0..n {
        if k.tangent(i as f64 / n as f64).norm() < 1e-9 {
            return Err(Error::Structure(format!("derivative vanishes near s = {}", i as f64 / n as f64)));
        }
    }
    let d = min_self_distance(k, n);
    if d < tol {
        return Err(Error::Structure(format!("curve comes within {d:.3e} of itself")));
    }
    Ok(())
}

/// A closed polygon. Vertex `i` sits at `s = i / m`; on each edge `s` is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalKnot {
    vertices: Vec<V3>,
}

/// Closest distance between segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: &V3, p1: &V3, q0: &V3, q1: &V3) -> f64 {
    let (d1, d2, r) = (p1 - p0, q1 - q0, p0 - q0);
    let (a, e, f) = (d1.dot(&d1), d2.dot(&d2), d2.dot(&r));
    let (c, b) = (d1.dot(&r), d1.dot(&d2));
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (p0 + d1 * s - q0 - d2 * t).norm()
}

impl PolygonalKnot {
    pub fn new(vertices: Vec<V3>) -> Result<Self> {
        let m = vertices.len();
        if m < 3 {
            return Err(Error::Structure("a polygon needs at least 3 vertices".into()));
        }
        let scale = vertices.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let tol = 1e-9 * scale;
        for i in 0..m {
            if (vertices[(i + 1) % m] - vertices[i]).norm() <= tol {
                return Err(Error::Structure(format!("vertices {i} and {} coincide", (i + 1) % m)));
            }
        }
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let d = segment_distance(&vertices[i], &vertices[(i + 1) % m], &vertices[j], &vertices[(j + 1) % m]);
                if d <= tol {
                    return Err(Error::Structure(format!("segments {i} and {j} intersect")));
                }
            }
        }
        Ok(PolygonalKnot { vertices })
    }

    pub fn vertices(&self) -> &[V3] {
        &self.vertices
    }

    pub fn n_segments(&self) -> usize {
        self.vertices.len()
    }

    /// Endpoints of segment `i`.
    pub fn segment(&self, i: usize) -> (V3, V3) {
        let m = self.vertices.len();
        (self.vertices[i % m], self.vertices[(i + 1) % m])
    }

    /// Segment index and local coordinate in `[0, 1)`; a vertex belongs to the
    /// segment ending there, so tangents take the left limit at corners.
    fn locate(&self, s: f64) -> (usize, f64) {
        let m = self.vertices.len();
        let t = wrap(s) * m as f64;
        let i = t.floor();
        if t == i {
            ((i as usize + m - 1) % m, 1.0)
        } else {
            (i as usize % m, t - i)
        }
    }

    pub fn transformed(&self, rotation: &Matrix3<f64>, shift: &V3) -> Self {
        PolygonalKnot { vertices: self.vertices.iter().map(|v| rotation * v + shift).collect() }
    }
}

impl Curve for PolygonalKnot {
    fn point(&self, s: f64) -> V3 {
        let (i, u) = self.locate(s);
        let (a, b) = self.segment(i);
        a + (b - a) * u
    }

    fn tangent(&self, s: f64) -> V3 {
        let (i, _) = self.locate(s);
        let (a, b) = self.segment(i);
        (b - a) * self.vertices.len() as f64
    }

    fn segments(&self) -> Option<usize> {
        Some(self.vertices.len())
    }
}

/// Either kind of knot, as loaded from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum Knot {
    Parametric(ParametricKnot),
    Polygonal(PolygonalKnot),
}

impl Curve for Knot {
    fn point(&self, s: f64) -> V3 {
        match self {
            Knot::Parametric(k) => k.point(s),
            Knot::Polygonal(k) => k.point(s),
        }
    }

    fn tangent(&self, s: f64) -> V3 {
        match self {
            Knot::Parametric(k) => k.tangent(s),
            Knot::Polygonal(k) => k.tangent(s),
        }
    }

    fn segments(&self) -> Option<usize> {
        match self {
            Knot::Parametric(_) => None,
            Knot::Polygonal(k) => Some(k.n_segments()),
        }
    }
}

/// The named knots: `unknot`, `trefoil`, `figure8` and `torus(p,q)`.
pub fn standard_knot(name: &str) -> Result<ParametricKnot> {
    let name = name.trim();
    match name {
        "unknot" => Ok(ParametricKnot::unknot()),
        "trefoil" => Ok(ParametricKnot::trefoil()),
        "figure8" => Ok(ParametricKnot::figure8()),
        _ => {
            let inner = name
                .strip_prefix("torus(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Parameter(format!("unknown knot {name:?}")))?;
            let (p, q) = inner.split_once(',').ok_or_else(|| Error::Parse(format!("bad torus knot {name:?}")))?;
            let p = p.trim().parse().map_err(|_| Error::Parse(format!("bad torus knot {name:?}")))?;
            let q = q.trim().parse().map_err(|_| Error::Parse(format!("bad torus knot {name:?}")))?;
            ParametricKnot::torus(p, q)
        }
    }
}
