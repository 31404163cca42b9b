//! Periodic sampling grids, fields and the centered Fourier transform.
//!
//! A grid of dimension `n`, period `L` and resolution `M` samples the
//! torus `[-L/2, L/2)^n` at `x_j = -L/2 + j L/M`. Frequencies are
//! `xi_k = (2 pi / L) k` with `k = -M/2 .. M/2 - 1`; frequency index `i`
//! stores `k = i - M/2`.
//!
//! The forward transform approximates `F f(xi) = int e^{-i x xi} f(x) dx`
//! by the Riemann sum, the inverse carries the factor `(2 pi)^{-n}` and
//! integrates against `d xi` with spacing `2 pi / L`. On the grid the two
//! are exact inverses.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::pairwise_sum;
use crate::par;

pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    period: f64,
    res: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Physical,
    Frequency,
}

impl Grid {
    pub fn new(dim: usize, period: f64, res: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Parameter(format!("dimension {dim} not in 1..=2")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Parameter(format!("period {period} must be positive")));
        }
        if res < 2 || !res.is_power_of_two() {
            return Err(Error::Parameter(format!("resolution {res} must be a power of two >= 2")));
        }
        Ok(Grid { dim, period, res })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn res(&self) -> usize {
        self.res
    }
    /// Number of samples, `M^n`.
    pub fn len(&self) -> usize {
        self.res.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn shape(&self) -> Vec<usize> {
        vec![self.res; self.dim]
    }
    /// Physical spacing `h = L/M`.
    pub fn spacing(&self) -> f64 {
        self.period / self.res as f64
    }
    /// Frequency spacing `2 pi / L`.
    pub fn freq_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }
    /// Largest representable frequency magnitude per axis, `pi M / L`.
    pub fn max_freq(&self) -> f64 {
        std::f64::consts::PI * self.res as f64 / self.period
    }
    /// Quadrature weight of one sample on the given side.
    pub fn measure(&self, side: Side) -> f64 {
        match side {
            Side::Physical => self.spacing().powi(self.dim as i32),
            Side::Frequency => self.freq_spacing().powi(self.dim as i32),
        }
    }
    pub fn point(&self, j: usize) -> f64 {
        -0.5 * self.period + j as f64 * self.spacing()
    }
    pub fn freq_index(&self, i: usize) -> i64 {
        i as i64 - (self.res / 2) as i64
    }
    pub fn freq(&self, i: usize) -> f64 {
        self.freq_index(i) as f64 * self.freq_spacing()
    }
    /// Per-axis indices of a flat (row-major) index. Unused axes are 0.
    pub fn multi(&self, flat: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.res, flat % self.res],
        }
    }
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.res + i)
    }
    pub fn point_at(&self, flat: usize) -> [f64; MAX_DIM] {
        let m = self.multi(flat);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = self.point(m[a]);
        }
        out
    }
    pub fn freq_at(&self, flat: usize) -> [f64; MAX_DIM] {
        let m = self.multi(flat);
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = self.freq(m[a]);
        }
        out
    }
    pub fn coords_at(&self, side: Side, flat: usize) -> [f64; MAX_DIM] {
        match side {
            Side::Physical => self.point_at(flat),
            Side::Frequency => self.freq_at(flat),
        }
    }
    /// Integer frequency indices `k` of a flat frequency index.
    pub fn freq_indices_at(&self, flat: usize) -> [i64; MAX_DIM] {
        let m = self.multi(flat);
        let mut out = [0i64; MAX_DIM];
        for a in 0..self.dim {
            out[a] = self.freq_index(m[a]);
        }
        out
    }
    /// Flat index of integer frequency `k`, if representable.
    pub fn index_of_freq(&self, k: &[i64]) -> Option<usize> {
        let half = (self.res / 2) as i64;
        let mut flat = 0usize;
        for &ka in &k[..self.dim] {
            if ka < -half || ka >= half {
                return None;
            }
            flat = flat * self.res + (ka + half) as usize;
        }
        Some(flat)
    }
    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.res == other.res
            && (self.period - other.period).abs() <= 1e-12 * self.period
    }
}

/// Samples of a complex function on a grid, on one side of the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    side: Side,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid, side: Side) -> Self {
        Field { grid, side, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_values(grid: Grid, side: Side, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, side, values })
    }

    /// Sample `f` at the grid coordinates of the requested side.
    pub fn from_fn<F>(grid: Grid, side: Side, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        let n = grid.dim();
        let values = par::map_range(grid.len(), |i| {
            let c = grid.coords_at(side, i);
            f(&c[..n])
        });
        Field { grid, side, values }
    }

    pub fn from_real_fn<F>(grid: Grid, side: Side, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        Self::from_fn(grid, side, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Field {
        Field { grid: self.grid, side: self.side, values: self.values.iter().map(|&z| f(z)).collect() }
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.side != other.side {
            return Err(Error::Shape("fields live on different grids or sides".into()));
        }
        Ok(())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Field { grid: self.grid, side: self.side, values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, side: self.side, values })
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    /// `max |self - other| / max |other|`.
    pub fn rel_max_error(&self, reference: &Field) -> Result<f64> {
        let d = self.sub(reference)?;
        let den = reference.max_abs();
        Ok(if den == 0.0 { d.max_abs() } else { d.max_abs() / den })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized DFT along the given axes of a row-major array.
///
/// Forward uses `e^{-2 pi i jk/M}`, inverse `e^{+2 pi i jk/M}`.
pub fn fft_axes(data: &mut [Complex64], shape: &[usize], axes: &[usize], dir: Direction) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "data length does not match shape");
    let mut planner = FftPlanner::<f64>::new();
    for &axis in axes {
        let len = shape[axis];
        if len <= 1 {
            continue;
        }
        let plan: Arc<dyn Fft<f64>> = match dir {
            Direction::Forward => planner.plan_fft_forward(len),
            Direction::Inverse => planner.plan_fft_inverse(len),
        };
        let stride: usize = shape[axis + 1..].iter().product();
        if stride == 1 {
            par::for_each_chunk_mut(data, len, |_, line| plan.process(line));
            continue;
        }
        let lines = total / len;
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        // line l = (outer o, inner s) with base o*len*stride + s
        for l in 0..lines {
            let (o, s) = (l / stride, l % stride);
            let base = o * len * stride + s;
            let dst = &mut buf[l * len..(l + 1) * len];
            for (i, d) in dst.iter_mut().enumerate() {
                *d = data[base + i * stride];
            }
        }
        par::for_each_chunk_mut(&mut buf, len, |_, line| plan.process(line));
        for l in 0..lines {
            let (o, s) = (l / stride, l % stride);
            let base = o * len * stride + s;
            for i in 0..len {
                data[base + i * stride] = buf[l * len + i];
            }
        }
    }
}

/// Position in the raw DFT ordering of centered index `i`.
#[inline]
pub fn raw_of_centered(i: usize, m: usize) -> usize {
    (i + m / 2) % m
}

/// Signed integer frequency of raw DFT index `r`, mapped to `-m/2 .. m/2-1`.
#[inline]
pub fn signed_of_raw(r: usize, m: usize) -> i64 {
    if r < m / 2 {
        r as i64
    } else {
        r as i64 - m as i64
    }
}

fn parity_sign(k: &[i64]) -> f64 {
    if k.iter().map(|v| v.rem_euclid(2)).sum::<i64>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Centered forward transform of a physical field.
pub fn forward_transform(f: &Field) -> Result<Field> {
    if f.side != Side::Physical {
        return Err(Error::Shape("forward transform expects a physical field".into()));
    }
    let g = f.grid;
    let m = g.res();
    let mut raw = f.values.clone();
    let axes: Vec<usize> = (0..g.dim()).collect();
    fft_axes(&mut raw, &g.shape(), &axes, Direction::Forward);
    let w = g.measure(Side::Physical);
    let values = (0..g.len())
        .map(|i| {
            let mi = g.multi(i);
            let k = g.freq_indices_at(i);
            let mut r = [0usize; MAX_DIM];
            for a in 0..g.dim() {
                r[a] = raw_of_centered(mi[a], m);
            }
            raw[g.flat(&r)] * (w * parity_sign(&k[..g.dim()]))
        })
        .collect();
    Ok(Field { grid: g, side: Side::Frequency, values })
}

/// Centered inverse transform of a frequency field.
pub fn inverse_transform(fh: &Field) -> Result<Field> {
    if fh.side != Side::Frequency {
        return Err(Error::Shape("inverse transform expects a frequency field".into()));
    }
    let g = fh.grid;
    let m = g.res();
    let mut raw = vec![Complex64::new(0.0, 0.0); g.len()];
    for i in 0..g.len() {
        let mi = g.multi(i);
        let k = g.freq_indices_at(i);
        let mut r = [0usize; MAX_DIM];
        for a in 0..g.dim() {
            r[a] = raw_of_centered(mi[a], m);
        }
        raw[g.flat(&r)] = fh.values[i] * parity_sign(&k[..g.dim()]);
    }
    let axes: Vec<usize> = (0..g.dim()).collect();
    fft_axes(&mut raw, &g.shape(), &axes, Direction::Inverse);
    let s = g.period().powi(-(g.dim() as i32));
    for v in raw.iter_mut() {
        *v *= s;
    }
    Ok(Field { grid: g, side: Side::Physical, values: raw })
}

/// `m(D) f`: multiply the transform of `f` by `m(xi)` and invert.
pub fn apply_multiplier<M>(f: &Field, m: M) -> Result<Field>
where
    M: Fn(&[f64]) -> Complex64 + Sync + Send,
{
    let mut fh = forward_transform(f)?;
    let g = fh.grid;
    let n = g.dim();
    let mult = par::map_range(g.len(), |i| m(&g.freq_at(i)[..n]));
    for (v, w) in fh.values.iter_mut().zip(mult) {
        *v *= w;
    }
    inverse_transform(&fh)
}

/// Periodic convolution `int K(x - y) f(y) dy` with the kernel sampled at
/// the lags `x_i - x_j`.
pub fn convolve<K>(f: &Field, kernel: K) -> Result<Field>
where
    K: Fn(&[f64]) -> Complex64 + Sync + Send,
{
    if f.side != Side::Physical {
        return Err(Error::Shape("convolution expects a physical field".into()));
    }
    let g = f.grid;
    let m = g.res();
    let h = g.spacing();
    let n = g.dim();
    let mut kraw = par::map_range(g.len(), |r| {
        let mr = g.multi(r);
        let mut lag = [0.0; MAX_DIM];
        for a in 0..n {
            lag[a] = signed_of_raw(mr[a], m) as f64 * h;
        }
        kernel(&lag[..n])
    });
    let mut fraw = f.values.clone();
    let shape = g.shape();
    let axes: Vec<usize> = (0..n).collect();
    fft_axes(&mut kraw, &shape, &axes, Direction::Forward);
    fft_axes(&mut fraw, &shape, &axes, Direction::Forward);
    for (a, b) in fraw.iter_mut().zip(&kraw) {
        *a *= b;
    }
    fft_axes(&mut fraw, &shape, &axes, Direction::Inverse);
    let s = g.measure(Side::Physical) / g.len() as f64;
    for v in fraw.iter_mut() {
        *v *= s;
    }
    Ok(Field { grid: g, side: Side::Physical, values: fraw })
}

/// Discrete `L^p` norm with the side's quadrature weight; `p = inf` gives
/// the maximum modulus.
pub fn lebesgue_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("exponent p = {p} must be positive")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let w = f.grid.measure(f.side);
    let terms: Vec<f64> = f.values.iter().map(|z| z.norm().powf(p)).collect();
    Ok((w * pairwise_sum(&terms)).powf(1.0 / p))
}

const MAGIC: &[u8; 8] = b"MPDOFLD1";
const HEADER_LEN: usize = 32;

/// Serialize to the binary field format: a 32-byte header (magic, `n` as
/// u32, `L` as f64, `M` as u32, side as u32, 4 reserved bytes) followed by
/// interleaved little-endian `f64` real/imaginary pairs.
pub fn field_to_bytes(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * f.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f.grid.dim as u32).to_le_bytes());
    out.extend_from_slice(&f.grid.period.to_le_bytes());
    out.extend_from_slice(&(f.grid.res as u32).to_le_bytes());
    let side: u32 = match f.side {
        Side::Physical => 0,
        Side::Frequency => 1,
    };
    out.extend_from_slice(&side.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for z in &f.values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing MPDOFLD1 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let dim = u32_at(8) as usize;
    let period = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let res = u32_at(20) as usize;
    let side = match u32_at(24) {
        0 => Side::Physical,
        1 => Side::Frequency,
        s => return Err(Error::Format(format!("unknown side tag {s}"))),
    };
    let grid = Grid::new(dim, period, res).map_err(|e| Error::Format(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 16 * grid.len() {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            body.len(),
            16 * grid.len()
        )));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(Field { grid, side, values })
}

pub fn write_field(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&field_to_bytes(f))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    field_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Direct evaluation of the Riemann sum defining the forward transform.
    fn forward_oracle(f: &Field) -> Vec<Complex64> {
        let g = *f.grid();
        let w = g.measure(Side::Physical);
        (0..g.len())
            .map(|k| {
                let xi = g.freq_at(k);
                let mut acc = c(0.0, 0.0);
                for j in 0..g.len() {
                    let x = g.point_at(j);
                    let dot: f64 = (0..g.dim()).map(|a| x[a] * xi[a]).sum();
                    acc += f.values()[j] * Complex64::from_polar(1.0, -dot);
                }
                acc * w
            })
            .collect()
    }

    fn sample_field(g: Grid, seed: u64) -> Field {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = (0..g.len()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        Field::from_values(g, Side::Physical, v).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 1.0, 8).is_err());
        assert!(Grid::new(1, 0.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 12).is_err());
        assert!(Grid::new(2, 1.0, 16).is_ok());
    }

    #[test]
    fn coordinates() {
        let g = Grid::new(1, 8.0, 16).unwrap();
        assert_eq!(g.point(0), -4.0);
        assert_eq!(g.point(8), 0.0);
        assert_eq!(g.freq_index(0), -8);
        assert_eq!(g.freq_index(8), 0);
        assert!((g.freq(9) - 2.0 * PI / 8.0).abs() < 1e-15);
        assert_eq!(g.index_of_freq(&[3]), Some(11));
        assert_eq!(g.index_of_freq(&[8]), None);
    }

    #[test]
    fn forward_matches_riemann_sum_1d_and_2d() {
        for (dim, l, m) in [(1, 8.0, 16), (1, 5.0, 32), (2, 6.0, 8)] {
            let g = Grid::new(dim, l, m).unwrap();
            let f = sample_field(g, 7);
            let fast = forward_transform(&f).unwrap();
            let slow = forward_oracle(&f);
            for (a, b) in fast.values().iter().zip(&slow) {
                assert!((a - b).norm() < 1e-11, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gaussian_transform() {
        // F e^{-x^2/2} = sqrt(2 pi) e^{-xi^2/2}
        let g = Grid::new(1, 40.0, 256).unwrap();
        let f = Field::from_real_fn(g, Side::Physical, |x| (-0.5 * x[0] * x[0]).exp());
        let fh = forward_transform(&f).unwrap();
        for i in 0..g.len() {
            let xi = g.freq(i);
            let exact = (2.0 * PI).sqrt() * (-0.5 * xi * xi).exp();
            assert!((fh.values()[i] - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let g = Grid::new(1, 6.0, 32).unwrap();
        let f = sample_field(g, 3);
        let k = |t: &[f64]| c((-t[0] * t[0]).exp(), 0.1 * t[0]);
        let fast = convolve(&f, k).unwrap();
        let h = g.spacing();
        for i in 0..g.len() {
            let mut acc = c(0.0, 0.0);
            for j in 0..g.len() {
                let lag = signed_of_raw((i + g.len() - j) % g.len(), g.len()) as f64 * h;
                acc += k(&[lag]) * f.values()[j];
            }
            assert!((fast.values()[i] - acc * h).norm() < 1e-12);
        }
    }

    #[test]
    fn lebesgue_norms() {
        let g = Grid::new(1, 4.0, 64).unwrap();
        let f = Field::from_real_fn(g, Side::Physical, |_| 2.0);
        assert!((lebesgue_norm(&f, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((lebesgue_norm(&f, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(lebesgue_norm(&f, f64::INFINITY).unwrap(), 2.0);
        assert!(lebesgue_norm(&f, 0.0).is_err());
    }

    #[test]
    fn binary_format_round_trip_and_layout() {
        let g = Grid::new(2, 3.5, 4).unwrap();
        let f = sample_field(g, 11);
        let bytes = field_to_bytes(&f);
        assert_eq!(bytes.len(), 32 + 16 * 16);
        assert_eq!(&bytes[..8], b"MPDOFLD1");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3.5);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 4);
        assert_eq!(field_from_bytes(&bytes).unwrap(), f);
        assert!(field_from_bytes(&bytes[..40]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(field_from_bytes(&bad), Err(Error::Format(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trip(seed in any::<u64>(), dim in 1usize..=2, lexp in 1u32..5, period in 0.5f64..20.0) {
            let g = Grid::new(dim, period, 1 << lexp).unwrap();
            let f = sample_field(g, seed);
            let back = inverse_transform(&forward_transform(&f).unwrap()).unwrap();
            prop_assert!(back.rel_max_error(&f).unwrap() < 1e-12);
        }

        #[test]
        fn plancherel(seed in any::<u64>(), dim in 1usize..=2, lexp in 1u32..5, period in 0.5f64..20.0) {
            let g = Grid::new(dim, period, 1 << lexp).unwrap();
            let f = sample_field(g, seed);
            let fh = forward_transform(&f).unwrap();
            let lhs = lebesgue_norm(&f, 2.0).unwrap().powi(2);
            let rhs = lebesgue_norm(&fh, 2.0).unwrap().powi(2) / (2.0 * PI).powi(dim as i32);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));
        }

        #[test]
        fn binary_round_trip(seed in any::<u64>(), lexp in 1u32..6) {
            let g = Grid::new(1, 2.0, 1 << lexp).unwrap();
            let f = sample_field(g, seed);
            prop_assert_eq!(field_from_bytes(&field_to_bytes(&f)).unwrap(), f);
        }
    }
}
