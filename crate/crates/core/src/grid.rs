//! Periodic space(-time) grids and the fields that live on them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bernstein::Anisotropy;
use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 16;
pub const MAX_POINTS: usize = 4096;

/// The `d_i` axes of one block, each of period `length` with `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAxes {
    pub dim: usize,
    pub length: f64,
    pub n: usize,
}

/// Uniform samples `t_k = k·horizon/steps`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeAxis {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub blocks: Vec<BlockAxes>,
    pub time: Option<TimeAxis>,
}

impl TorusGrid {
    pub fn new(blocks: Vec<BlockAxes>, time: Option<TimeAxis>) -> Result<Self> {
        let g = Self { blocks, time };
        g.validate()?;
        Ok(g)
    }

    /// `ℓ` one-dimensional blocks of common period and resolution.
    pub fn uniform_1d(ell: usize, length: f64, n: usize, time: Option<TimeAxis>) -> Result<Self> {
        Self::new(vec![BlockAxes { dim: 1, length, n }; ell], time)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::arg("grid needs at least one block"));
        }
        for b in &self.blocks {
            if !(1..=3).contains(&b.dim) {
                return Err(Error::arg(format!("block dimension {} is outside 1..=3", b.dim)));
            }
            if !(b.length > 0.0 && b.length.is_finite()) {
                return Err(Error::arg(format!("torus period must be positive, got {}", b.length)));
            }
            if !b.n.is_power_of_two() || b.n < MIN_POINTS || b.n > MAX_POINTS {
                return Err(Error::arg(format!(
                    "points per axis must be a power of two in [{MIN_POINTS}, {MAX_POINTS}], got {}",
                    b.n
                )));
            }
        }
        if let Some(t) = &self.time {
            if !(t.horizon > 0.0 && t.horizon.is_finite()) || t.steps == 0 {
                return Err(Error::arg("time axis needs a positive horizon and at least one step"));
            }
        }
        Ok(())
    }

    pub fn check_anisotropy(&self, a: &Anisotropy) -> Result<()> {
        let dims: Vec<usize> = self.blocks.iter().map(|b| b.dim).collect();
        if dims != a.dims {
            return Err(Error::arg(format!("grid block dimensions {dims:?} do not match anisotropy {:?}", a.dims)));
        }
        Ok(())
    }

    pub fn ell(&self) -> usize {
        self.blocks.len()
    }

    /// Point counts of the spatial axes in storage order.
    pub fn spatial_shape(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| std::iter::repeat(b.n).take(b.dim)).collect()
    }

    /// Period of each spatial axis in storage order.
    pub fn axis_lengths(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| std::iter::repeat(b.length).take(b.dim)).collect()
    }

    /// Block index of each spatial axis.
    pub fn axis_blocks(&self) -> Vec<usize> {
        self.blocks.iter().enumerate().flat_map(|(i, b)| std::iter::repeat(i).take(b.dim)).collect()
    }

    pub fn spatial_len(&self) -> usize {
        self.spatial_shape().iter().product()
    }

    pub fn time_len(&self) -> usize {
        self.time.as_ref().map_or(1, |t| t.steps + 1)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.time_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.blocks.iter().map(|b| (b.length / b.n as f64).powi(b.dim as i32)).product()
    }

    pub fn volume(&self) -> f64 {
        self.blocks.iter().map(|b| b.length.powi(b.dim as i32)).product()
    }

    /// Multi-index of a flat spatial index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let shape = self.spatial_shape();
        let mut out = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            out[a] = idx % shape[a];
            idx /= shape[a];
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        let shape = self.spatial_shape();
        multi.iter().zip(&shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Coordinates `x_j = j·L/n` of a flat spatial index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let lengths = self.axis_lengths();
        let shape = self.spatial_shape();
        self.unravel(idx)
            .iter()
            .zip(lengths.iter().zip(&shape))
            .map(|(&j, (&l, &n))| j as f64 * l / n as f64)
            .collect()
    }

    /// Frequency vector of a flat spatial (mode) index.
    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        let lengths = self.axis_lengths();
        let shape = self.spatial_shape();
        self.unravel(idx)
            .iter()
            .zip(lengths.iter().zip(&shape))
            .map(|(&j, (&l, &n))| axis_frequency(j, n, l))
            .collect()
    }

    /// `|ξ_i|²` per mode and block, flattened as `[mode * ℓ + block]`.
    pub fn block_sq_norms(&self) -> Vec<f64> {
        let ell = self.ell();
        let axis_blocks = self.axis_blocks();
        let mut out = vec![0.0; self.spatial_len() * ell];
        for idx in 0..self.spatial_len() {
            for (a, xi) in self.frequency(idx).into_iter().enumerate() {
                out[idx * ell + axis_blocks[a]] += xi * xi;
            }
        }
        out
    }

    /// `φ_i(|ξ_i|²)` per mode and block, flattened like [`Self::block_sq_norms`].
    ///
    /// Evaluated once per distinct block-local frequency.
    pub fn symbol_table(&self, a: &Anisotropy) -> Result<Vec<f64>> {
        self.check_anisotropy(a)?;
        let ell = self.ell();
        let sq = self.block_sq_norms();
        let mut out = vec![0.0; sq.len()];
        for i in 0..ell {
            let mut cache: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
            for m in 0..self.spatial_len() {
                let s = sq[m * ell + i];
                let v = *cache.entry(s.to_bits()).or_insert_with(|| a.phis[i].value(s));
                out[m * ell + i] = v;
            }
        }
        Ok(out)
    }
}

/// `2π/L · j` for `j < n/2`, `2π/L · (j − n)` otherwise.
pub fn axis_frequency(j: usize, n: usize, length: f64) -> f64 {
    let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    2.0 * PI / length * k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueKind {
    Real,
    Complex,
}

/// Values over a [`TorusGrid`], row-major with axis order
/// `[time, block axes...]` (the time axis only when present).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
    pub kind: ValueKind,
}

impl GridFunction {
    pub fn zeros(grid: TorusGrid, kind: ValueKind) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            kind,
        }
    }

    /// Samples `f(t, x)`; `t = 0` on space-only grids.
    pub fn from_fn(grid: TorusGrid, kind: ValueKind, f: impl Fn(f64, &[f64]) -> Complex64) -> Self {
        let sl = grid.spatial_len();
        let points: Vec<Vec<f64>> = (0..sl).map(|i| grid.point(i)).collect();
        let times: Vec<f64> = grid.time.as_ref().map_or(vec![0.0], |t| t.samples());
        let mut values = Vec::with_capacity(grid.len());
        for &t in &times {
            for p in &points {
                values.push(f(t, p));
            }
        }
        Self { grid, values, kind }
    }

    pub fn from_real_fn(grid: TorusGrid, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        Self::from_fn(grid, ValueKind::Real, |t, x| Complex64::new(f(t, x), 0.0))
    }

    pub fn is_space_time(&self) -> bool {
        self.grid.time.is_some()
    }

    pub fn slice(&self, k: usize) -> &[Complex64] {
        let sl = self.grid.spatial_len();
        &self.values[k * sl..(k + 1) * sl]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [Complex64] {
        let sl = self.grid.spatial_len();
        &mut self.values[k * sl..(k + 1) * sl]
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete `L_p` norm of one time slice (Riemann sum over the torus).
    pub fn slice_lp_norm(&self, k: usize, p: f64) -> f64 {
        lp_norm(self.slice(k), self.grid.cell_volume(), p)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::arg("grid functions live on different grids"));
        }
        Ok(())
    }
}

pub fn lp_norm(values: &[Complex64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// Multi-dimensional FFT over the spatial axes of each time slice.
pub struct SpatialFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl SpatialFft {
    pub fn new(grid: &TorusGrid) -> Self {
        let shape = grid.spatial_shape();
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { shape, forward, inverse }
    }

    /// Unnormalised forward transform of one slice in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform of one slice in place, scaled by `1/N`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total: usize = self.shape.iter().product();
        debug_assert_eq!(data.len(), total);
        let mut stride = total;
        for (axis, &n) in self.shape.iter().enumerate() {
            stride /= n;
            let plan = &plans[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let outer = total / (n * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, l) in line.iter().enumerate() {
                        data[base + j * stride] = *l;
                    }
                }
            }
        }
    }

    /// Forward transform of every time slice, in parallel over slices.
    pub fn forward_all(&self, values: &mut [Complex64]) {
        let sl: usize = self.shape.iter().product();
        values.par_chunks_mut(sl).for_each(|c| self.forward(c));
    }

    pub fn inverse_all(&self, values: &mut [Complex64]) {
        let sl: usize = self.shape.iter().product();
        values.par_chunks_mut(sl).for_each(|c| self.inverse(c));
    }
}

/// Multiplies every slice of `u` spectrally by `m(mode)`.
pub fn apply_multiplier(u: &GridFunction, m: &[Complex64]) -> GridFunction {
    let fft = SpatialFft::new(&u.grid);
    let mut out = u.clone();
    let sl = u.grid.spatial_len();
    out.values.par_chunks_mut(sl).for_each(|c| {
        fft.forward(c);
        c.iter_mut().zip(m).for_each(|(v, w)| *v *= w);
        fft.inverse(c);
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_are_symmetric_multiples() {
        assert_eq!(axis_frequency(0, 16, 2.0 * PI), 0.0);
        assert_eq!(axis_frequency(3, 16, 2.0 * PI), 3.0);
        assert_eq!(axis_frequency(8, 16, 2.0 * PI), -8.0);
        assert_eq!(axis_frequency(15, 16, 2.0 * PI), -1.0);
    }

    #[test]
    fn rejects_bad_point_counts() {
        assert!(TorusGrid::uniform_1d(1, 1.0, 24, None).is_err());
        assert!(TorusGrid::uniform_1d(1, 1.0, 8, None).is_err());
        assert!(TorusGrid::uniform_1d(1, 1.0, 8192, None).is_err());
        assert!(TorusGrid::uniform_1d(1, 1.0, 4096, None).is_ok());
    }

    #[test]
    fn fft_round_trip_and_single_mode() {
        let grid = TorusGrid::new(
            vec![BlockAxes { dim: 2, length: 2.0 * PI, n: 16 }, BlockAxes { dim: 1, length: 4.0, n: 32 }],
            None,
        )
        .unwrap();
        let u = GridFunction::from_fn(grid.clone(), ValueKind::Complex, |_, x| {
            Complex64::from_polar(1.0, 2.0 * x[0] - x[1] + 2.0 * PI / 4.0 * 3.0 * x[2])
        });
        let fft = SpatialFft::new(&grid);
        let mut spec = u.values.clone();
        fft.forward(&mut spec);
        let peak = grid.ravel(&[2, 15, 3]);
        for (i, v) in spec.iter().enumerate() {
            let expected = if i == peak { grid.spatial_len() as f64 } else { 0.0 };
            assert!((v.norm() - expected).abs() < 1e-9, "mode {i}");
        }
        fft.inverse(&mut spec);
        for (a, b) in spec.iter().zip(&u.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn block_norms_sum_axes_of_each_block() {
        let grid = TorusGrid::new(vec![BlockAxes { dim: 2, length: 2.0 * PI, n: 16 }], None).unwrap();
        let idx = grid.ravel(&[3, 14]);
        assert_eq!(grid.block_sq_norms()[idx], 9.0 + 4.0);
    }
}
