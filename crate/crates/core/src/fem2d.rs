//! P1 finite elements on the uniform diagonal-split triangulation of (0,1)².

use crate::error::{Error, Result};
use crate::rules::gauss_legendre;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = vec![];
        let mut values = vec![];
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().expect("entry") += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// c₁·self + c₂·other for matrices sharing a sparsity pattern.
    pub fn combine(&self, c1: f64, other: &Csr, c2: f64) -> Csr {
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        Csr {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| c1 * a + c2 * b)
                .collect(),
            ..self.clone()
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.values[k] - self.get(self.col_idx[k], i)).abs());
            }
        }
        worst
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .max()
            .unwrap_or(0)
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.matvec(x), y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformTriangulation {
    pub m: usize,
    pub h: f64,
}

impl UniformTriangulation {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain {
                what: "M",
                value: m as f64,
                range: "[2, inf)",
            });
        }
        Ok(Self {
            m,
            h: 1.0 / m as f64,
        })
    }

    pub fn dofs(&self) -> usize {
        (self.m - 1) * (self.m - 1)
    }

    /// Interior index of grid node (i, j), if interior.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        let m = self.m;
        (i > 0 && j > 0 && i < m && j < m).then(|| (j - 1) * (m - 1) + (i - 1))
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let w = self.m - 1;
        (
            ((idx % w) + 1) as f64 * self.h,
            ((idx / w) + 1) as f64 * self.h,
        )
    }

    /// Triangles as grid-index triples, counter-clockwise.
    pub fn triangles(&self) -> impl Iterator<Item = [(usize, usize); 3]> + '_ {
        (0..self.m).flat_map(move |j| {
            (0..self.m).flat_map(move |i| {
                [
                    [(i, j), (i + 1, j), (i + 1, j + 1)],
                    [(i, j), (i + 1, j + 1), (i, j + 1)],
                ]
            })
        })
    }

    fn point(&self, v: (usize, usize)) -> (f64, f64) {
        (v.0 as f64 * self.h, v.1 as f64 * self.h)
    }

    /// Grid node nearest to (x, y), with its interior index if any.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, usize) {
        let r = |v: f64| ((v * self.m as f64).round().max(0.0) as usize).min(self.m);
        (r(x), r(y))
    }
}

/// Element area and barycentric gradients.
fn element(p: [(f64, f64); 3]) -> (f64, [(f64, f64); 3]) {
    let det = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
    let mut g = [(0.0, 0.0); 3];
    for k in 0..3 {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[k] = ((a.1 - b.1) / det, (b.0 - a.0) / det);
    }
    (0.5 * det.abs(), g)
}

// 7-point degree-5 rule on the reference triangle (barycentric, weight)
const D7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [
            0.059_715_871_789_770,
            0.470_142_064_105_115,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.059_715_871_789_770,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.470_142_064_105_115,
            0.059_715_871_789_770,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.797_426_985_353_087,
            0.101_286_507_323_456,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.797_426_985_353_087,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.101_286_507_323_456,
            0.797_426_985_353_087,
        ],
        0.125_939_180_544_827,
    ),
];

#[derive(Debug, Clone)]
pub struct FemSystem {
    pub mesh: UniformTriangulation,
    pub mass: Csr,
    pub stiffness: Csr,
}

pub fn assemble(m: usize) -> Result<FemSystem> {
    let mesh = UniformTriangulation::new(m)?;
    let n = mesh.dofs();
    let mut mrows = vec![Vec::with_capacity(7); n];
    let mut arows = vec![Vec::with_capacity(7); n];
    for tri in mesh.triangles() {
        let p = tri.map(|v| mesh.point(v));
        let (area, g) = element(p);
        for a in 0..3 {
            let Some(i) = mesh.index(tri[a].0, tri[a].1) else {
                continue;
            };
            for b in 0..3 {
                let Some(j) = mesh.index(tri[b].0, tri[b].1) else {
                    continue;
                };
                let mv = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                let av = area * (g[a].0 * g[b].0 + g[a].1 * g[b].1);
                mrows[i].push((j, mv));
                arows[i].push((j, av));
            }
        }
    }
    Ok(FemSystem {
        mesh,
        mass: Csr::from_rows(mrows),
        stiffness: Csr::from_rows(arows),
    })
}

impl FemSystem {
    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    /// (q, φᵢ) by the 7-point rule on each triangle.
    pub fn load(&self, q: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut b = vec![0.0; mesh.dofs()];
        for tri in mesh.triangles() {
            let p = tri.map(|v| mesh.point(v));
            let (area, _) = element(p);
            let idx = tri.map(|v| mesh.index(v.0, v.1));
            if idx.iter().all(Option::is_none) {
                continue;
            }
            for (lam, w) in D7 {
                let x = lam[0] * p[0].0 + lam[1] * p[1].0 + lam[2] * p[2].0;
                let y = lam[0] * p[0].1 + lam[1] * p[1].1 + lam[2] * p[2].1;
                let qv = w * area * q(x, y);
                for k in 0..3 {
                    if let Some(i) = idx[k] {
                        b[i] += qv * lam[k];
                    }
                }
            }
        }
        b
    }

    /// (∇q, ∇φᵢ), using ∫_T ∇q = ∮_{∂T} q n ds so only values of q are needed.
    pub fn ritz_load(&self, q: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mesh = &self.mesh;
        let gl = gauss_legendre(5);
        let mut b = vec![0.0; mesh.dofs()];
        for tri in mesh.triangles() {
            let idx = tri.map(|v| mesh.index(v.0, v.1));
            if idx.iter().all(Option::is_none) {
                continue;
            }
            let p = tri.map(|v| mesh.point(v));
            let (_, g) = element(p);
            let (mut gx, mut gy) = (0.0, 0.0);
            for e in 0..3 {
                let (a, c) = (p[e], p[(e + 1) % 3]);
                // outward normal times edge length for a counter-clockwise triangle
                let (nx, ny) = (c.1 - a.1, a.0 - c.0);
                let s = gl.apply(|z, _| q(a.0 + z * (c.0 - a.0), a.1 + z * (c.1 - a.1)));
                gx += s * nx;
                gy += s * ny;
            }
            for k in 0..3 {
                if let Some(i) = idx[k] {
                    b[i] += g[k].0 * gx + g[k].1 * gy;
                }
            }
        }
        b
    }

    pub fn interpolate(&self, q: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.dofs())
            .map(|k| {
                let (x, y) = self.mesh.coords(k);
                q(x, y)
            })
            .collect()
    }

    /// Π_h q: A x = (∇q, ∇φᵢ).
    pub fn ritz_projection(&self, q: impl Fn(f64, f64) -> f64, tol: f64) -> Result<Vec<f64>> {
        let b = self.ritz_load(q);
        solve_spd(self, 0.0, 1.0, &b, tol)
    }

    /// √(xᵀMx).
    pub fn l2_norm(&self, x: &[f64]) -> f64 {
        self.mass.dot(x, x).max(0.0).sqrt()
    }

    /// (τ Σᵢ ‖Φᵢ‖²)^{1/2}.
    pub fn l2_time_norm(&self, series: &[Vec<f64>], tau: f64) -> f64 {
        (tau * series.iter().map(|x| self.mass.dot(x, x)).sum::<f64>()).sqrt()
    }
}

/// Jacobi-preconditioned conjugate gradients on c₁M + c₂A.
pub fn solve_spd(sys: &FemSystem, c1: f64, c2: f64, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(c1 >= 0.0 && c2 >= 0.0) || (c1 == 0.0 && c2 == 0.0) {
        return Err(Error::Invalid("need c1, c2 >= 0, not both zero".into()));
    }
    let mat = sys.mass.combine(c1, &sys.stiffness, c2);
    cg(&mat, rhs, tol, 10 * mat.n + 100)
}

pub fn cg(mat: &Csr, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = mat.n;
    let bnorm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let dinv: Vec<f64> = (0..n).map(|i| 1.0 / mat.get(i, i)).collect();
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        mat.matvec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok(x);
        }
        if !res.is_finite() {
            return Err(Error::Solver {
                iterations: it + 1,
                residual: res,
            });
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    Err(Error::Solver {
        iterations: max_iter,
        residual: res,
    })
}

/// Cholesky factor of a banded SPD matrix, lower band stored row-wise.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(mat: &Csr, bw: usize) -> Result<Self> {
        let n = mat.n;
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for k in mat.row_ptr[i]..mat.row_ptr[i + 1] {
                let j = mat.col_idx[k];
                if j <= i {
                    if i - j > bw {
                        return Err(Error::Invalid(format!(
                            "entry ({i},{j}) outside bandwidth {bw}"
                        )));
                    }
                    band[i * w + bw - (i - j)] = mat.values[k];
                }
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let k0 = i0.max(j.saturating_sub(bw));
                let mut s = band[i * w + bw - (i - j)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= band[ri + k] * band[rj + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Invalid(format!(
                            "matrix not positive definite at row {i}"
                        )));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + bw - (i - j)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let mut s = y[i];
            for k in i0..i {
                s -= self.band[ri + k] * y[k];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            y[i] /= self.band[i * w + bw];
            let yi = y[i];
            let ri = i * w + bw - i;
            for k in i.saturating_sub(bw)..i {
                y[k] -= self.band[ri + k] * yi;
            }
        }
        y
    }
}

impl FemSystem {
    /// Half bandwidth of the interior ordering.
    pub fn bandwidth(&self) -> usize {
        self.mesh.m
    }

    pub fn factor(&self, c1: f64, c2: f64) -> Result<BandedCholesky> {
        BandedCholesky::factor(
            &self.mass.combine(c1, &self.stiffness, c2),
            self.bandwidth(),
        )
    }
}
