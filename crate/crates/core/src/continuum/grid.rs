use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values on the tensor grid `x_i = (i - (n-1)/2) h` per axis, `h = 2 extent / n`,
/// so the grid is symmetric about the origin and cells tile `[-extent, extent]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    d: usize,
    n: usize,
    extent: f64,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub d: usize,
    pub extents: Vec<f64>,
    pub spacings: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridField {
    pub fn zeros(d: usize, n: usize, extent: f64) -> Result<Self> {
        validate_shape(d, n, extent)?;
        Ok(Self {
            d,
            n,
            extent,
            values: vec![0.0; n.pow(d as u32)],
        })
    }

    pub fn from_values(d: usize, n: usize, extent: f64, values: Vec<f64>) -> Result<Self> {
        validate_shape(d, n, extent)?;
        if values.len() != n.pow(d as u32) {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {d}-dimensional grid of side {n}, got {}",
                n.pow(d as u32),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("grid value {k} is not finite")));
        }
        Ok(Self { d, n, extent, values })
    }

    pub fn from_fn(d: usize, n: usize, extent: f64, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let mut grid = Self::zeros(d, n, extent)?;
        let h = grid.spacing();
        let c = 0.5 * (n as f64 - 1.0);
        grid.values.par_iter_mut().enumerate().for_each(|(flat, v)| {
            let mut x = [0.0; 4];
            let mut rest = flat;
            for a in (0..d).rev() {
                x[a] = ((rest % n) as f64 - c) * h;
                rest /= n;
            }
            *v = f(&x[..d]);
        });
        Ok(grid)
    }

    /// `e^{-|x|^2 / (2 sigma^2)}`.
    pub fn gaussian(d: usize, n: usize, extent: f64, sigma: f64) -> Result<Self> {
        Self::from_fn(d, n, extent, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma * sigma)).exp()
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node coordinates along one axis.
    pub fn axis_nodes(&self) -> Vec<f64> {
        axis_nodes(self.n, self.spacing())
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.d == other.d && self.n == other.n && self.extent == other.extent
    }

    /// Grid `L^p` norm with cell weight `h^d`; `p = inf` is the max norm.
    pub fn norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume()).powf(1.0 / p)
    }

    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume())
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Largest `|value|` on the outermost layer of cells.
    pub fn boundary_max(&self) -> f64 {
        let n = self.n;
        let d = self.d;
        self.values
            .iter()
            .enumerate()
            .filter(|(flat, _)| {
                let mut rest = *flat;
                (0..d).any(|_| {
                    let i = rest % n;
                    rest /= n;
                    i == 0 || i == n - 1
                })
            })
            .fold(0.0f64, |a, (_, v)| a.max(v.abs()))
    }

    /// Applies the same `n x n` matrix (row-major) along every axis.
    pub fn apply_separable(&self, matrix: &[f64]) -> GridField {
        let mut current = self.values.clone();
        for axis in 0..self.d {
            current = apply_axis(&current, self.d, self.n, axis, matrix);
        }
        GridField {
            d: self.d,
            n: self.n,
            extent: self.extent,
            values: current,
        }
    }

    /// `sum_j f_j prod_a w_a[j_a]`: the separable functional with one weight
    /// vector per axis.
    pub fn contract(&self, weights: &[Vec<f64>]) -> Result<f64> {
        if weights.len() != self.d || weights.iter().any(|w| w.len() != self.n) {
            return Err(Error::InvalidInput("one weight vector of grid length per axis is required".into()));
        }
        let mut current = self.values.clone();
        for w in weights.iter().rev() {
            current = current.chunks(self.n).map(|line| line.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
        }
        Ok(current[0])
    }

    /// Derivative of the sinc interpolant at an arbitrary point:
    /// `orders[a]` is the derivative order along axis `a`.
    pub fn interpolate_derivative(&self, x: &[f64], orders: &[u32]) -> Result<f64> {
        if x.len() != self.d || orders.len() != self.d {
            return Err(Error::InvalidInput("point and order dimension mismatch".into()));
        }
        let h = self.spacing();
        let weights: Vec<Vec<f64>> = x
            .iter()
            .zip(orders)
            .map(|(&xa, &r)| sinc_weights(self.n, h, xa, r))
            .collect();
        self.contract(&weights)
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        self.interpolate_derivative(x, &vec![0; self.d])
    }

    /// `f_r(x) = f(x / r)` through the sinc interpolant.
    pub fn dilate(&self, r: f64) -> Result<GridField> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain {
                what: "dilation factor",
                constraint: "> 0",
                value: r,
            });
        }
        let h = self.spacing();
        let nodes = self.axis_nodes();
        let mut matrix = Vec::with_capacity(self.n * self.n);
        for &xi in &nodes {
            matrix.extend(sinc_weights(self.n, h, xi / r, 0));
        }
        Ok(self.apply_separable(&matrix))
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar {
            d: self.d,
            extents: vec![self.extent; self.d],
            spacings: vec![self.spacing(); self.d],
            shape: vec![self.n; self.d],
        }
    }

    /// Writes `<stem>.bin` (little-endian f64) and `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(stem.with_extension("bin"), bytes)?;
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        if sidecar.shape.len() != sidecar.d
            || sidecar.shape.iter().any(|s| *s != sidecar.shape[0])
            || sidecar.extents.iter().any(|e| *e != sidecar.extents[0])
        {
            return Err(Error::InvalidInput("only isotropic grids are supported".into()));
        }
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidInput("binary payload is not a whole number of f64 values".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let grid = Self::from_values(sidecar.d, sidecar.shape[0], sidecar.extents[0], values)?;
        if sidecar.spacings.iter().any(|s| (s - grid.spacing()).abs() > 1e-12 * grid.spacing()) {
            return Err(Error::InvalidInput("spacing in sidecar disagrees with extent and shape".into()));
        }
        Ok(grid)
    }

    pub(crate) fn check_same(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::InvalidInput("fields live on different grids".into()))
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> GridField {
        GridField {
            d: self.d,
            n: self.n,
            extent: self.extent,
            values,
        }
    }
}

fn validate_shape(d: usize, n: usize, extent: f64) -> Result<()> {
    if !(1..=4).contains(&d) {
        return Err(Error::InvalidInput(format!("dimension {d} is outside 1..=4")));
    }
    if n < 2 {
        return Err(Error::InvalidInput("grid side must be at least 2".into()));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::Domain {
            what: "grid extent",
            constraint: "> 0",
            value: extent,
        });
    }
    Ok(())
}

pub fn axis_nodes(n: usize, h: f64) -> Vec<f64> {
    let c = 0.5 * (n as f64 - 1.0);
    (0..n).map(|i| (i as f64 - c) * h).collect()
}

/// `d^r/dx^r sinc((x - x_j)/h)` for every node `x_j`.
pub fn sinc_weights(n: usize, h: f64, x: f64, r: u32) -> Vec<f64> {
    axis_nodes(n, h)
        .into_iter()
        .map(|xj| sinc_derivative((x - xj) / h, r) / h.powi(r as i32))
        .collect()
}

/// `d^r/dt^r sin(pi t)/(pi t)`.
pub fn sinc_derivative(t: f64, r: u32) -> f64 {
    if t.abs() < 1.0 {
        // Taylor series of sin(pi t)/(pi t) = sum_k (-1)^k (pi t)^{2k} / (2k+1)!;
        // the closed forms below cancel badly near 0 for higher orders.
        let mut total = 0.0;
        let mut fact = 1.0;
        for k in 0..24u32 {
            let power = 2 * k;
            if k > 0 {
                fact *= (2 * k) as f64 * (2 * k + 1) as f64;
            }
            if power < r {
                continue;
            }
            let coeff = (-1f64).powi(k as i32) * PI.powi(power as i32) / fact;
            let falling: f64 = (0..r).map(|j| (power - j) as f64).product();
            total += coeff * falling * t.powi((power - r) as i32);
        }
        return total;
    }
    let (s, c) = (PI * t).sin_cos();
    let p = PI;
    match r {
        0 => s / (p * t),
        1 => c / t - s / (p * t * t),
        2 => -p * s / t - 2.0 * c / (t * t) + 2.0 * s / (p * t.powi(3)),
        3 => -p * p * c / t + 3.0 * p * s / (t * t) + 6.0 * c / t.powi(3) - 6.0 * s / (p * t.powi(4)),
        _ => {
            // Leibniz rule on sin(pi t) * (1/(pi t)).
            let mut total = 0.0;
            let mut binom = 1.0;
            for k in 0..=r {
                if k > 0 {
                    binom *= (r - k + 1) as f64 / k as f64;
                }
                let sin_part = p.powi((r - k) as i32) * (PI * t + 0.5 * PI * (r - k) as f64).sin();
                let falling: f64 = (1..=k).map(|j| -(j as f64)).product();
                let inv_part = falling * t.powi(-(k as i32) - 1) / p;
                total += binom * sin_part * inv_part;
            }
            total
        }
    }
}

/// `out[.., i, ..] = sum_j M[i][j] f[.., j, ..]` along `axis`.
pub(crate) fn apply_axis(values: &[f64], d: usize, n: usize, axis: usize, matrix: &[f64]) -> Vec<f64> {
    let stride = n.pow((d - 1 - axis) as u32);
    let block = n * stride;
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(block)
        .zip(values.par_chunks(block))
        .for_each(|(dst, src)| {
            for i in 0..n {
                let row = &matrix[i * n..(i + 1) * n];
                let target = &mut dst[i * stride..(i + 1) * stride];
                for (j, &m) in row.iter().enumerate() {
                    if m == 0.0 {
                        continue;
                    }
                    let line = &src[j * stride..(j + 1) * stride];
                    target.iter_mut().zip(line).for_each(|(t, v)| *t += m * v);
                }
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_symmetric_cell_centres() {
        let g = GridField::zeros(3, 48, 8.0).unwrap();
        let nodes = g.axis_nodes();
        assert!((g.spacing() - 1.0 / 3.0).abs() < 1e-15);
        assert!((nodes[0] + nodes[47]).abs() < 1e-14);
        assert!((nodes[0] + 8.0 - g.spacing() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn sinc_derivatives_match_finite_differences() {
        for &t in &[0.0004, 0.3, 1.7, -2.25, 5.5] {
            for r in 0..5u32 {
                let e = 1e-4;
                let fd = (sinc_derivative(t + e, r) - sinc_derivative(t - e, r)) / (2.0 * e);
                let exact = sinc_derivative(t, r + 1);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "t={t} r={r}: {fd} vs {exact}");
            }
        }
        assert!((sinc_derivative(0.0, 2) + PI * PI / 3.0).abs() < 1e-12);
        assert_eq!(sinc_derivative(0.0, 1), 0.0);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_functions() {
        let g = GridField::gaussian(2, 40, 8.0, 1.0).unwrap();
        let nodes = g.axis_nodes();
        let v = g.interpolate(&[nodes[13], nodes[22]]).unwrap();
        assert!((v - g.values()[13 * 40 + 22]).abs() < 1e-14);
        let x = [0.31, -0.77];
        let exact = (-(x[0] * x[0] + x[1] * x[1]) / 2.0f64).exp();
        assert!((g.interpolate(&x).unwrap() - exact).abs() < 1e-10);
        let dx = g.interpolate_derivative(&x, &[1, 0]).unwrap();
        assert!((dx + x[0] * exact).abs() < 1e-9);
    }

    #[test]
    fn dilation_of_a_gaussian_rescales_its_width() {
        let g = GridField::gaussian(2, 48, 8.0, 1.0).unwrap();
        let wide = g.dilate(1.5).unwrap();
        let exact = GridField::gaussian(2, 48, 8.0, 1.5).unwrap();
        let err = wide.values().iter().zip(exact.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridField::gaussian(3, 8, 2.0, 0.7).unwrap();
        let stem = dir.path().join("field");
        g.save(&stem).unwrap();
        assert_eq!(GridField::load(&stem).unwrap(), g);
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json")).unwrap()).unwrap();
        assert_eq!(sidecar.shape, vec![8, 8, 8]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField::zeros(5, 4, 1.0).is_err());
        assert!(GridField::zeros(3, 1, 1.0).is_err());
        assert!(GridField::zeros(3, 4, -1.0).is_err());
        assert!(GridField::from_values(1, 3, 1.0, vec![0.0, f64::NAN, 0.0]).is_err());
    }
}
