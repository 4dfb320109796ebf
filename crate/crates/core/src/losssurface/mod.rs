//! Two-dimensional loss slices through three weight vectors.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::linalg::{axpy, dot, norm2, scale, sub};
use crate::models::{Dataset, Model};

/// Smallest angle between the two spanning directions.
pub const MIN_ANGLE: f64 = 1e-6;

/// Plane through `origin` spanned by orthonormal `u`, `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub origin: ParamVector,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Coordinates of `w0`, `w1`, `w2` in the `(u, v)` basis.
    pub points: [(f64, f64); 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

/// Loss values on a lattice; `values[i * nb + j]` sits at `(a[i], b[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.b.len() + j]
    }
}

pub fn plane_from_points(w0: &ParamVector, w1: &[f64], w2: &[f64]) -> Result<Plane> {
    let n = w0.len();
    if w1.len() != n || w2.len() != n {
        return Err(Error::Dimension(format!(
            "plane points have lengths {n}, {}, {}",
            w1.len(),
            w2.len()
        )));
    }
    let d1 = sub(w1, &w0.values);
    let d2 = sub(w2, &w0.values);
    let (n1, n2) = (norm2(&d1), norm2(&d2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::Collinear { angle: 0.0 });
    }
    let cos = (dot(&d1, &d2) / (n1 * n2)).clamp(-1.0, 1.0);
    let angle = cos.acos().min(std::f64::consts::PI - cos.acos());
    if angle <= MIN_ANGLE {
        return Err(Error::Collinear { angle });
    }
    let mut u = d1;
    scale(1.0 / n1, &mut u);
    let a2 = dot(&d2, &u);
    let mut v = d2;
    axpy(-a2, &u, &mut v);
    // second pass keeps |u·v| at round-off level
    let c = dot(&v, &u);
    axpy(-c, &u, &mut v);
    let b2 = norm2(&v);
    scale(1.0 / b2, &mut v);
    Ok(Plane {
        origin: w0.clone(),
        u,
        v,
        points: [(0.0, 0.0), (n1, 0.0), (a2, b2)],
    })
}

impl Plane {
    pub fn point(&self, a: f64, b: f64) -> Vec<f64> {
        let mut w = self.origin.values.clone();
        axpy(a, &self.u, &mut w);
        axpy(b, &self.v, &mut w);
        w
    }

    /// Bounding box of the three points grown 1.5× about its centre.
    pub fn default_extent(&self) -> Extent {
        let (mut lo_a, mut hi_a, mut lo_b, mut hi_b) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(a, b) in &self.points {
            lo_a = lo_a.min(a);
            hi_a = hi_a.max(a);
            lo_b = lo_b.min(b);
            hi_b = hi_b.max(b);
        }
        let (ca, cb) = ((lo_a + hi_a) / 2.0, (lo_b + hi_b) / 2.0);
        let (ha, hb) = (0.75 * (hi_a - lo_a), 0.75 * (hi_b - lo_b));
        Extent {
            a_min: ca - ha,
            a_max: ca + ha,
            b_min: cb - hb,
            b_max: cb + hb,
        }
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluate `loss` at `origin + a·u + b·v` over an `na × nb` lattice.
pub fn grid_eval_fn<F>(loss: F, plane: &Plane, extent: Extent, resolution: (usize, usize)) -> Result<Grid>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let (na, nb) = resolution;
    if na < 2 || nb < 2 {
        return Err(Error::InvalidArgument(format!("grid resolution {na}×{nb} must be at least 2×2")));
    }
    let a = lattice(extent.a_min, extent.a_max, na);
    let b = lattice(extent.b_min, extent.b_max, nb);
    let values = (0..na * nb)
        .into_par_iter()
        .map(|k| loss(&plane.point(a[k / nb], b[k % nb])))
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid { a, b, values })
}

/// Mean cross-entropy of `model` on `data` over the lattice.
pub fn grid_eval(model: &Model, plane: &Plane, extent: Extent, resolution: (usize, usize), data: &Dataset) -> Result<Grid> {
    grid_eval_fn(|w| model.data_loss(w, data), plane, extent, resolution)
}

pub fn grid_csv(grid: &Grid) -> String {
    let mut s = String::from("a,b,loss\n");
    for (i, a) in grid.a.iter().enumerate() {
        for (j, b) in grid.b.iter().enumerate() {
            let _ = writeln!(s, "{a:.16e},{b:.16e},{:.16e}", grid.get(i, j));
        }
    }
    s
}

#[derive(Serialize)]
struct PlaneMeta<'a> {
    extent: Extent,
    resolution: (usize, usize),
    points: [(f64, f64); 3],
    u: &'a [f64],
    v: &'a [f64],
    origin: &'a [f64],
}

/// Write `<stem>.csv` and the plane metadata as `<stem>.json`.
pub fn export_grid(plane: &Plane, extent: Extent, grid: &Grid, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join(format!("{stem}.csv")), grid_csv(grid).as_bytes())?;
    let meta = PlaneMeta {
        extent,
        resolution: (grid.a.len(), grid.b.len()),
        points: plane.points,
        u: &plane.u,
        v: &plane.v,
        origin: &plane.origin.values,
    };
    write_atomic(&dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamLayout;

    fn pv(v: Vec<f64>) -> ParamVector {
        let mut l = ParamLayout::new();
        l.push("w", vec![v.len()]);
        ParamVector::new(l, v).unwrap()
    }

    #[test]
    fn axis_points() {
        let p = plane_from_points(&pv(vec![0.0, 0.0]), &[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert_eq!(p.u, vec![1.0, 0.0]);
        assert_eq!(p.v, vec![0.0, 1.0]);
        assert_eq!(p.points, [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]);
    }

    #[test]
    fn collinear_rejected() {
        let e = plane_from_points(&pv(vec![0.0, 0.0]), &[1.0, 1.0], &[2.0, 2.0]);
        assert!(matches!(e, Err(Error::Collinear { .. })));
    }

    #[test]
    fn quadratic_grid() {
        let p = plane_from_points(&pv(vec![0.0, 0.0]), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let ext = Extent { a_min: -1.0, a_max: 1.0, b_min: -2.0, b_max: 2.0 };
        let g = grid_eval_fn(|w| Ok(0.5 * dot(w, w)), &p, ext, (5, 3)).unwrap();
        for (i, a) in g.a.iter().enumerate() {
            for (j, b) in g.b.iter().enumerate() {
                assert!((g.get(i, j) - (a * a + b * b) / 2.0).abs() < 1e-15);
            }
        }
        let csv = grid_csv(&g);
        assert!(csv.starts_with("a,b,loss\n-1.0000000000000000e0,-2.0000000000000000e0,"));
        assert_eq!(csv.lines().count(), 16);
    }

    #[test]
    fn default_extent_is_wider() {
        let p = plane_from_points(&pv(vec![0.0, 0.0]), &[2.0, 0.0], &[0.0, 2.0]).unwrap();
        let e = p.default_extent();
        assert_eq!((e.a_min, e.a_max, e.b_min, e.b_max), (-0.5, 2.5, -0.5, 2.5));
    }
}
