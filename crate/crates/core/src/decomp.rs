//! Dyadic and uniform frequency decompositions.

use num_complex::Complex64;

use crate::bump::{compact_bump, euclid, lp_base};
use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, Field, Grid, Side, MAX_DIM};
use crate::par;
use crate::symbol::{raw_multiplier_table, SampledSymbol, SymbolSpectrum};

/// Radial Littlewood-Paley shells on the frequency side of a grid.
///
/// `psi_0 = phi` and `psi_k(y) = phi(y / 2^k) - phi(y / 2^{k-1})`, where
/// `phi = 1` on `|y| <= 1` and vanishes on `|y| >= 2`. The top shell index
/// is the smallest `K` with `2^K` at least the largest grid frequency
/// modulus, so the shells sum to one at every sample.
#[derive(Debug, Clone)]
pub struct LPPartition {
    grid: Grid,
    k_max: usize,
    base: Field,
}

impl LPPartition {
    pub fn new(grid: &Grid) -> Result<Self> {
        let top = (grid.dim() as f64).sqrt() * grid.max_freq();
        let k = top.log2().ceil();
        if !(k >= 3.0) {
            return Err(Error::Resolution(format!(
                "grid frequencies reach only |xi| = {top:.3}; at least three dyadic shells are needed"
            )));
        }
        let base = Field::from_real_fn(*grid, Side::Frequency, |y| lp_base(euclid(y)));
        Ok(LPPartition { grid: *grid, k_max: k as usize, base })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    /// Samples of `phi` at the grid frequencies.
    pub fn base(&self) -> &Field {
        &self.base
    }

    /// `psi_k` at radius `r`.
    pub fn psi(k: usize, r: f64) -> f64 {
        if k == 0 {
            lp_base(r)
        } else {
            lp_base(r / (1u64 << k) as f64) - lp_base(r / (1u64 << (k - 1)) as f64)
        }
    }

    /// `psi_k` at the grid frequencies, centered ordering.
    pub fn shell(&self, k: usize) -> Result<Vec<f64>> {
        self.check(k)?;
        let n = self.grid.dim();
        Ok((0..self.grid.len()).map(|i| Self::psi(k, euclid(&self.grid.freq_at(i)[..n]))).collect())
    }

    /// `psi_k` at the raw DFT ordering of the grid.
    pub fn raw_table(&self, k: usize) -> Vec<f64> {
        raw_multiplier_table(&self.grid, |y| Self::psi(k, euclid(y)))
    }

    fn check(&self, k: usize) -> Result<()> {
        if k > self.k_max {
            return Err(Error::Range(format!("shell {k} exceeds K_max = {}", self.k_max)));
        }
        Ok(())
    }

    /// `max |sum_k psi_k - 1|` over the given frequencies.
    pub fn residual_at(&self, freqs: &[Vec<f64>]) -> f64 {
        freqs
            .iter()
            .map(|y| {
                let r = euclid(y);
                let s: f64 = (0..=self.k_max).map(|k| Self::psi(k, r)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Residual at every grid frequency.
    pub fn grid_residual(&self) -> f64 {
        let n = self.grid.dim();
        let freqs: Vec<Vec<f64>> = (0..self.grid.len()).map(|i| self.grid.freq_at(i)[..n].to_vec()).collect();
        self.residual_at(&freqs)
    }
}

/// Pair `(kappa, chi)` with `supp kappa` in `[-1,1]^n`, `chi` band-limited
/// to the unit ball, `|chi|` bounded below on `[-1,1]^n` and
/// `sum_nu kappa(xi - nu) chi(xi - nu) = 1`.
///
/// The pair grid's physical axis carries the frequency variable `xi`; its
/// frequency axis is the dual variable in which `chi` is band-limited.
#[derive(Debug, Clone)]
pub struct UniformPair {
    grid: Grid,
    width: f64,
    nodes: Vec<([f64; MAX_DIM], f64)>,
    c_lower: f64,
    kappa: Field,
    chi: Field,
}

pub const DEFAULT_CHI_WIDTH: f64 = 0.45;
pub const CHI_LOWER_TARGET: f64 = 0.1;
const CHI_LOWER_FLOOR: f64 = 0.05;

impl UniformPair {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.period() < 8.0 {
            return Err(Error::Parameter(format!(
                "pair grid period {} must be at least 8",
                grid.period()
            )));
        }
        let n = grid.dim();
        let mut width = DEFAULT_CHI_WIDTH;
        loop {
            let nodes = chi_nodes(grid, width);
            let c_lower = chi_lower_bound(&nodes, n);
            if c_lower >= CHI_LOWER_TARGET {
                let mut pair = UniformPair {
                    grid: *grid,
                    width,
                    nodes,
                    c_lower,
                    kappa: Field::zeros(*grid, Side::Physical),
                    chi: Field::zeros(*grid, Side::Physical),
                };
                pair.chi = Field::from_real_fn(*grid, Side::Physical, |xi| pair.chi_at(xi));
                pair.kappa = Field::from_real_fn(*grid, Side::Physical, |xi| pair.kappa_at(xi));
                return Ok(pair);
            }
            width *= 0.8;
            if width < 0.05 {
                return Err(Error::Construction(format!(
                    "chi lower bound {c_lower:.3} stays below {CHI_LOWER_FLOOR}"
                )));
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }
    pub fn kappa(&self) -> &Field {
        &self.kappa
    }
    pub fn chi(&self) -> &Field {
        &self.chi
    }

    pub fn chi_at(&self, xi: &[f64]) -> f64 {
        chi_eval(&self.nodes, xi)
    }

    pub fn partition_at(xi: &[f64]) -> f64 {
        xi.iter().map(|&t| normalized_bump(t)).product()
    }

    pub fn kappa_at(&self, xi: &[f64]) -> f64 {
        if xi.iter().any(|t| t.abs() >= 1.0) {
            return 0.0;
        }
        Self::partition_at(xi) / self.chi_at(xi)
    }

    /// `max |sum_nu kappa chi (xi - nu) - 1|` over the given points.
    pub fn partition_residual(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|xi| {
                let n = xi.len();
                let base: Vec<i64> = xi.iter().map(|t| t.floor() as i64).collect();
                let mut s = 0.0;
                for t in 0..3usize.pow(n as u32) {
                    let mut rem = t;
                    let mut d = [0.0; MAX_DIM];
                    for a in 0..n {
                        let nu = base[a] - 1 + (rem % 3) as i64;
                        rem /= 3;
                        d[a] = xi[a] - nu as f64;
                    }
                    s += self.kappa_at(&d[..n]) * self.chi_at(&d[..n]);
                }
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Relative `l^2` mass of the transform of `chi` outside the unit ball.
    pub fn chi_leakage(&self) -> Result<f64> {
        let fh = forward_transform(&self.chi)?;
        let n = self.grid.dim();
        let mut out = 0.0;
        let mut total = 0.0;
        for (i, z) in fh.values().iter().enumerate() {
            let m = z.norm_sqr();
            total += m;
            if euclid(&self.grid.freq_at(i)[..n]) > 1.0 {
                out += m;
            }
        }
        Ok((out / total).sqrt())
    }

    /// Largest `|kappa|` among samples outside `[-1,1]^n`.
    pub fn kappa_support_leakage(&self) -> f64 {
        let n = self.grid.dim();
        (0..self.grid.len())
            .filter(|&i| self.grid.point_at(i)[..n].iter().any(|t| t.abs() > 1.0))
            .map(|i| self.kappa.values()[i].norm())
            .fold(0.0, f64::max)
    }

    /// Integer lattice points whose boxes meet the frequency range of `grid`.
    pub fn box_range(grid: &Grid) -> i64 {
        grid.max_freq().ceil() as i64 + 1
    }
}

fn chi_nodes(grid: &Grid, width: f64) -> Vec<([f64; MAX_DIM], f64)> {
    let n = grid.dim();
    let mut nodes = Vec::new();
    for i in 0..grid.len() {
        let y = grid.freq_at(i);
        let r = euclid(&y[..n]);
        if r < width {
            nodes.push((y, compact_bump(r / width)));
        }
    }
    let total: f64 = nodes.iter().map(|(_, b)| b).sum();
    for (_, b) in nodes.iter_mut() {
        *b /= total;
    }
    nodes
}

fn chi_eval(nodes: &[([f64; MAX_DIM], f64)], xi: &[f64]) -> f64 {
    // the bump is even, so the inverse transform is a cosine sum
    nodes
        .iter()
        .map(|(y, b)| {
            let dot: f64 = xi.iter().zip(y.iter()).map(|(a, c)| a * c).sum();
            b * dot.cos()
        })
        .sum()
}

fn chi_lower_bound(nodes: &[([f64; MAX_DIM], f64)], n: usize) -> f64 {
    let steps: usize = 201;
    let mut lo = f64::INFINITY;
    let count = steps.pow(n as u32);
    for t in 0..count {
        let mut rem = t;
        let mut xi = [0.0; MAX_DIM];
        for a in 0..n {
            xi[a] = -1.0 + 2.0 * (rem % steps) as f64 / (steps - 1) as f64;
            rem /= steps;
        }
        lo = lo.min(chi_eval(nodes, &xi[..n]).abs());
    }
    lo
}

fn normalized_bump(t: f64) -> f64 {
    let b = compact_bump(t);
    if b == 0.0 {
        return 0.0;
    }
    let c = t.floor() as i64;
    let s: f64 = (c - 1..=c + 2).map(|mu| compact_bump(t - mu as f64)).sum();
    b / s
}

fn check_lattice_point(grid: &Grid, nu: &[i64]) -> Result<()> {
    if nu.len() != grid.dim() {
        return Err(Error::Shape("lattice point dimension differs from the grid".into()));
    }
    let r = UniformPair::box_range(grid);
    if nu.iter().any(|v| v.abs() > r) {
        return Err(Error::Range(format!("lattice point {nu:?} beyond the grid frequency range")));
    }
    Ok(())
}

fn lattice_multiplier<M>(f: &Field, nu: &[i64], m: M) -> Result<Field>
where
    M: Fn(&[f64]) -> f64 + Sync,
{
    check_lattice_point(f.grid(), nu)?;
    let mut fh = forward_transform(f)?;
    let g = *fh.grid();
    let n = g.dim();
    let w = par::map_range(g.len(), |i| {
        let xi = g.freq_at(i);
        let mut d = [0.0; MAX_DIM];
        for a in 0..n {
            d[a] = xi[a] - nu[a] as f64;
        }
        m(&d[..n])
    });
    for (v, c) in fh.values_mut().iter_mut().zip(w) {
        *v *= c;
    }
    inverse_transform(&fh)
}

/// `kappa(D - nu) f`.
pub fn box_apply(pair: &UniformPair, nu: &[i64], f: &Field) -> Result<Field> {
    lattice_multiplier(f, nu, |d| pair.kappa_at(d))
}

/// `chi(D - nu) kappa(D - nu) f`.
pub fn box_chi_apply(pair: &UniformPair, nu: &[i64], f: &Field) -> Result<Field> {
    lattice_multiplier(f, nu, |d| pair.kappa_at(d) * pair.chi_at(d))
}

fn lattice_points(grid: &Grid) -> Vec<Vec<i64>> {
    let r = UniformPair::box_range(grid);
    let side = (2 * r + 1) as usize;
    let n = grid.dim();
    (0..side.pow(n as u32))
        .map(|t| {
            let mut rem = t;
            let mut nu = vec![0i64; n];
            for a in (0..n).rev() {
                nu[a] = (rem % side) as i64 - r;
                rem /= side;
            }
            nu
        })
        .collect()
}

/// `sum_nu chi(D - nu) kappa(D - nu) f`, which returns `f`.
pub fn box_reconstruct(pair: &UniformPair, f: &Field) -> Result<Field> {
    let pts = lattice_points(f.grid());
    let parts = par::try_map_range(pts.len(), |i| box_chi_apply(pair, &pts[i], f))?;
    let mut out = Field::zeros(*f.grid(), Side::Physical);
    for p in parts {
        for (o, v) in out.values_mut().iter_mut().zip(p.values()) {
            *o += v;
        }
    }
    Ok(out)
}

/// Pointwise `(sum_nu |kappa(D - nu) f(x)|^2)^{1/2}`.
pub fn box_square_function(pair: &UniformPair, f: &Field) -> Result<Vec<f64>> {
    let pts = lattice_points(f.grid());
    let parts = par::try_map_range(pts.len(), |i| box_apply(pair, &pts[i], f))?;
    let mut acc = vec![0.0; f.grid().len()];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v.norm_sqr();
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

/// `Delta_k sigma = psi_{k_0}(D_x) psi_{k_1}(D_{xi_1}) ... psi_{k_N}(D_{xi_N}) sigma`.
pub fn delta_block(
    sym: &SampledSymbol,
    k: &[usize],
    lp_x: &LPPartition,
    lp_xi: &LPPartition,
) -> Result<SampledSymbol> {
    delta_block_spectral(&SymbolSpectrum::new(sym), k, lp_x, lp_xi)
}

/// [`delta_block`] reusing a precomputed spectrum.
pub fn delta_block_spectral(
    spec: &SymbolSpectrum,
    k: &[usize],
    lp_x: &LPPartition,
    lp_xi: &LPPartition,
) -> Result<SampledSymbol> {
    let sym = spec.symbol();
    if k.len() != sym.inputs() + 1 {
        return Err(Error::Shape(format!("{} shell indices for {} blocks", k.len(), sym.inputs() + 1)));
    }
    if !lp_x.grid().same_as(sym.grid_x()) || !lp_xi.grid().same_as(sym.grid_xi()) {
        return Err(Error::Shape("partitions are not built on the symbol grids".into()));
    }
    lp_x.check(k[0])?;
    for &kj in &k[1..] {
        lp_xi.check(kj)?;
    }
    let mut tables = vec![lp_x.raw_table(k[0])];
    for &kj in &k[1..] {
        tables.push(lp_xi.raw_table(kj));
    }
    spec.filter(&tables)
}

/// Complex helper used by tests and the CLI: build a random trigonometric
/// field with frequencies inside `|xi|_inf <= band`.
pub fn band_limited_field(grid: &Grid, band: f64, coeff: impl Fn(usize) -> Complex64) -> Result<Field> {
    let n = grid.dim();
    let mut fh = Field::zeros(*grid, Side::Frequency);
    for (i, v) in fh.values_mut().iter_mut().enumerate() {
        let xi = grid.freq_at(i);
        if xi[..n].iter().all(|t| t.abs() <= band) {
            *v = coeff(i);
        }
    }
    inverse_transform(&fh)
}
