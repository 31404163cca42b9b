//! Amalgam, uniformly local, weak-type, kernel and symbol norms.
//!
//! Unit cubes are `nu + Q` with `Q = [-1/2, 1/2)^n` and `nu` integral.
//! A grid is aligned when `L` is an integer and `M` is divisible by `L`,
//! so every cube holds the same number of samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::japanese;
use crate::decomp::LPPartition;
use crate::error::{Error, Result};
use crate::fit::pairwise_sum;
use crate::grid::{convolve, lebesgue_norm, Field, Grid, Side};
use crate::par;
use crate::symbol::{SampledSymbol, SymbolSpectrum};
use crate::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmalgamParams {
    /// Local exponent.
    pub p: f64,
    /// Global exponent over cubes.
    pub q: f64,
}

impl AmalgamParams {
    pub fn new(p: f64, q: f64) -> Self {
        AmalgamParams { p, q }
    }
    fn check(&self) -> Result<()> {
        if !(self.p > 0.0) || !(self.q > 0.0) {
            return Err(Error::Parameter(format!("amalgam exponents ({}, {}) must be positive", self.p, self.q)));
        }
        Ok(())
    }
}

/// Assignment of samples to cubes of side `cell`.
#[derive(Debug, Clone)]
pub struct CellMap {
    dim: usize,
    cells: usize,
    per_cell: usize,
    axis_cell: Vec<usize>,
}

impl CellMap {
    pub fn new(grid: &Grid, cell: f64) -> Result<Self> {
        if !(cell > 0.0) {
            return Err(Error::Parameter("cell side must be positive".into()));
        }
        let ratio = grid.period() / cell;
        let cells = ratio.round();
        if cells < 1.0 || (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Alignment(format!(
                "period {} is not a whole number of cells of side {cell}",
                grid.period()
            )));
        }
        let cells = cells as usize;
        if !grid.res().is_multiple_of(cells) {
            return Err(Error::Alignment(format!(
                "resolution {} is not divisible by the {cells} cells per axis",
                grid.res()
            )));
        }
        let s = grid.res() / cells;
        // sample j lies in cube floor(x_j/cell + 1/2) = floor((2j + s(1-C)) / 2s)
        let axis_cell = (0..grid.res())
            .map(|j| {
                let num = 2 * j as i64 + s as i64 * (1 - cells as i64);
                num.div_euclid(2 * s as i64).rem_euclid(cells as i64) as usize
            })
            .collect();
        Ok(CellMap { dim: grid.dim(), cells, per_cell: s, axis_cell })
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }
    /// Samples per cell and axis.
    pub fn samples_per_cell(&self) -> usize {
        self.per_cell
    }
    pub fn count(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }
    /// Cube index (flattened over axes) of a flat sample index.
    pub fn cell_of(&self, grid: &Grid, flat: usize) -> usize {
        let m = grid.multi(flat);
        (0..self.dim).fold(0, |acc, a| acc * self.cells + self.axis_cell[m[a]])
    }
    /// Axis cube index, mapped to the integer centre in `[-C/2, C/2)`.
    pub fn axis_centre(&self, axis_cell: usize) -> i64 {
        let half = (self.cells / 2) as i64;
        (axis_cell as i64 + half).rem_euclid(self.cells as i64) - half
    }
    fn axis_cells(&self) -> &[usize] {
        &self.axis_cell
    }
}

/// `l^q` norm of a finite sequence; `q = inf` is the maximum.
pub fn seq_norm(values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let terms: Vec<f64> = values.iter().map(|v| v.abs().powf(q)).collect();
    pairwise_sum(&terms).powf(1.0 / q)
}

/// Local `L^p` norms of `f` on each cube, in cube order.
pub fn local_norms(f: &Field, p: f64, cell: f64) -> Result<Vec<f64>> {
    let g = *f.grid();
    let map = CellMap::new(&g, cell)?;
    let mut acc = vec![0.0f64; map.count()];
    for (i, z) in f.values().iter().enumerate() {
        let c = map.cell_of(&g, i);
        let a = z.norm();
        if p.is_infinite() {
            acc[c] = acc[c].max(a);
        } else {
            acc[c] += a.powf(p);
        }
    }
    if p.is_finite() {
        let w = g.measure(f.side());
        for v in acc.iter_mut() {
            *v = (w * *v).powf(1.0 / p);
        }
    }
    Ok(acc)
}

/// `(L^p, l^q)` amalgam norm over unit cubes.
pub fn amalgam_norm(f: &Field, params: AmalgamParams) -> Result<f64> {
    amalgam_norm_cells(f, params, 1.0)
}

/// Amalgam norm over cubes of side `cell` centred on `cell * Z^n`.
pub fn amalgam_norm_cells(f: &Field, params: AmalgamParams, cell: f64) -> Result<f64> {
    params.check()?;
    Ok(seq_norm(&local_norms(f, params.p, cell)?, params.q))
}

/// Uniformly local `L^2` norm, the `(L^2, l^inf)` amalgam.
pub fn l2ul_norm(f: &Field) -> Result<f64> {
    amalgam_norm(f, AmalgamParams::new(2.0, f64::INFINITY))
}

/// Uniformly local `L^2` norm of a sampled symbol over unit cubes of
/// `R^n x (R^n)^N`.
pub fn symbol_l2ul_norm(sym: &SampledSymbol) -> Result<f64> {
    let gx = *sym.grid_x();
    let gxi = *sym.grid_xi();
    let mx = CellMap::new(&gx, 1.0)?;
    let mxi = CellMap::new(&gxi, 1.0)?;
    let cx = mx.count();
    let cxi = mxi.count();
    let nblocks = cxi.pow(sym.inputs() as u32);
    let xi_cell: Vec<usize> = (0..gxi.len()).map(|i| mxi.cell_of(&gxi, i)).collect();
    let per_x = gxi.len().pow(sym.inputs() as u32);
    let rows = par::map_range(gx.len(), |p| {
        let mut acc = vec![0.0; nblocks];
        let row = &sym.values()[p * per_x..(p + 1) * per_x];
        for (t, z) in row.iter().enumerate() {
            let mut rem = t;
            let mut id = 0;
            let mut mult = 1;
            for _ in 0..sym.inputs() {
                id += xi_cell[rem % gxi.len()] * mult;
                mult *= cxi;
                rem /= gxi.len();
            }
            acc[id] += z.norm_sqr();
        }
        (mx.cell_of(&gx, p), acc)
    });
    let mut total = vec![0.0; cx * nblocks];
    for (c, acc) in rows {
        for (k, v) in acc.into_iter().enumerate() {
            total[c * nblocks + k] += v;
        }
    }
    let m = total.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok((sym.measure() * m).sqrt())
}

/// Weak `l^{q,inf}` quasi-norm `sup_v v * #{|a| >= v}^{1/q}`.
pub fn lorentz_weak_norm(values: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Parameter(format!("Lorentz exponent {q} must be positive")));
    }
    let mut a: Vec<f64> = values.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    if q.is_infinite() {
        return Ok(a.iter().fold(0.0, |m, &v| m.max(v)));
    }
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut best = 0.0f64;
    for (i, &v) in a.iter().enumerate() {
        // only the last occurrence of a value gives its full count
        if i + 1 < a.len() && a[i + 1] == v {
            continue;
        }
        best = best.max(v * ((i + 1) as f64).powf(1.0 / q));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Decay exponent of `<x>^{-decay}`.
    pub decay: f64,
}

impl KernelParams {
    /// Default decay `2n + 2`.
    pub fn default_for(dim: usize) -> Self {
        KernelParams { decay: 2.0 * dim as f64 + 2.0 }
    }
}

/// `S f = <.>^{-decay} * f` on the torus, with the kernel periodized over
/// the nearest translates.
pub fn s_kernel_apply(f: &Field, params: KernelParams) -> Result<Field> {
    let g = *f.grid();
    let n = g.dim();
    if !(params.decay > n as f64) {
        return Err(Error::Parameter(format!("kernel decay {} must exceed n = {n}", params.decay)));
    }
    let l = g.period();
    let decay = params.decay;
    let kernel = move |z: &[f64]| {
        let mut s = 0.0;
        let shifts = 3usize.pow(n as u32);
        for t in 0..shifts {
            let mut rem = t;
            let mut w = [0.0; 2];
            for a in 0..n {
                w[a] = z[a] + (rem % 3) as f64 * l - l;
                rem /= 3;
            }
            s += japanese(&w[..n]).powf(-decay);
        }
        Complex64::new(s, 0.0)
    };
    let mag = f.map(|z| Complex64::new(z.norm(), 0.0));
    let out = convolve(&mag, kernel)?;
    Ok(out.map(|z| Complex64::new(z.re, 0.0)))
}

/// `|| S(|f|^2)^{1/2} ||_{L^p}`.
pub fn sqrt_s_square_norm(f: &Field, p: f64, params: KernelParams) -> Result<f64> {
    let n = f.grid().dim() as f64;
    if !(p.min(2.0) / 2.0 * params.decay > n) {
        return Err(Error::Parameter(format!(
            "min(1, p/2) * decay = {} must exceed n = {n}",
            p.min(2.0) / 2.0 * params.decay
        )));
    }
    let sq = f.map(|z| Complex64::new(z.norm_sqr(), 0.0));
    let s = s_kernel_apply(&sq, params)?;
    let root = s.map(|z| Complex64::new(z.re.max(0.0).sqrt(), 0.0));
    lebesgue_norm(&root, p)
}

/// `|| || g(x - nu) f(x) ||_{L^p_x} ||_{l^q_nu}` with integer shifts.
pub fn envelope_amalgam_norm(f: &Field, g: &Field, params: AmalgamParams) -> Result<f64> {
    params.check()?;
    let grid = *f.grid();
    if !grid.same_as(g.grid()) {
        return Err(Error::Shape("envelope and field grids differ".into()));
    }
    let map = CellMap::new(&grid, 1.0)?;
    let n = grid.dim();
    let c = map.cells_per_axis();
    let s = map.samples_per_cell();
    let m = grid.res();
    let w = grid.measure(Side::Physical);
    let locals = par::map_range(map.count(), |nu| {
        let mut shift = [0usize; 2];
        let mut rem = nu;
        for a in (0..n).rev() {
            shift[a] = (rem % c) * s;
            rem /= c;
        }
        let mut acc = Vec::with_capacity(grid.len());
        let mut mx = 0.0f64;
        for j in 0..grid.len() {
            let mj = grid.multi(j);
            let mut src = [0usize; 2];
            for a in 0..n {
                src[a] = (mj[a] + m - shift[a]) % m;
            }
            let v = g.values()[grid.flat(&src)].norm() * f.values()[j].norm();
            if params.p.is_infinite() {
                mx = mx.max(v);
            } else {
                acc.push(v.powf(params.p));
            }
        }
        if params.p.is_infinite() {
            mx
        } else {
            (w * pairwise_sum(&acc)).powf(1.0 / params.p)
        }
    });
    Ok(seq_norm(&locals, params.q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `envelope norm / amalgam norm` per non-zero field.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Sandwich constants `c1 1_Q <= |g| <= c2 <x>^{-decay}`.
    pub c1: f64,
    pub c2: f64,
}

/// Compare the envelope norm with `g` against the plain amalgam norm over
/// a family of fields.
pub fn equivalent_amalgam_check(
    family: &[Field],
    g: &Field,
    decay: f64,
    params: AmalgamParams,
) -> Result<EquivalenceReport> {
    params.check()?;
    let grid = *g.grid();
    let n = grid.dim() as f64;
    if !(decay > n / params.p.min(params.q)) {
        return Err(Error::Parameter(format!(
            "decay {decay} must exceed n / min(p, q) = {}",
            n / params.p.min(params.q)
        )));
    }
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for i in 0..grid.len() {
        let x = grid.point_at(i);
        let x = &x[..grid.dim()];
        let a = g.values()[i].norm();
        if x.iter().all(|v| (-0.5..0.5).contains(v)) {
            c1 = c1.min(a);
        }
        c2 = c2.max(a * japanese(x).powf(decay));
    }
    if !(c1 > 0.0) || !c2.is_finite() {
        return Err(Error::Parameter("envelope does not satisfy the sandwich bounds".into()));
    }
    let nonzero: Vec<&Field> = family.iter().filter(|f| !f.is_zero()).collect();
    if nonzero.is_empty() {
        return Err(Error::EmptyFamily("every field in the family is zero".into()));
    }
    let mut ratios = Vec::with_capacity(nonzero.len());
    for f in nonzero {
        let num = envelope_amalgam_norm(f, g, params)?;
        let den = amalgam_norm(f, params)?;
        ratios.push(num / den);
    }
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(EquivalenceReport { ratios, min_ratio, max_ratio, c1, c2 })
}

/// Discrete bmo seminorm over dyadic cubes aligned with the unit cells:
/// mean oscillation on cubes of side at most 1 and mean modulus on cubes
/// of side at least 1.
pub fn bmo_discrete_norm(f: &Field) -> Result<f64> {
    let grid = *f.grid();
    let map = CellMap::new(&grid, 1.0)?;
    let n = grid.dim();
    let m = grid.res();
    let s = map.samples_per_cell();
    let c = map.cells_per_axis();
    // roll each axis so that cell boundaries fall on multiples of s
    let cells = map.axis_cells();
    let start = (0..m).find(|&j| cells[j] != cells[(j + m - 1) % m]).unwrap_or(0);
    let roll = |t: usize| (start + t) % m;

    let mut sides = Vec::new();
    let mut w = s;
    loop {
        sides.push((w, true));
        if w % 2 != 0 || w == 1 {
            break;
        }
        w /= 2;
    }
    let mut k = 1;
    while k <= c && c % k == 0 {
        sides.push((k * s, false));
        k *= 2;
    }

    let mut best = 0.0f64;
    for (side, oscillation) in sides {
        let blocks = m / side;
        let nb = blocks.pow(n as u32);
        let vals = par::map_range(nb, |b| {
            let mut bi = [0usize; 2];
            let mut rem = b;
            for a in (0..n).rev() {
                bi[a] = rem % blocks;
                rem /= blocks;
            }
            let count = side.pow(n as u32);
            let mut zs = Vec::with_capacity(count);
            for t in 0..count {
                let mut idx = [0usize; 2];
                let mut r = t;
                for a in (0..n).rev() {
                    idx[a] = roll(bi[a] * side + r % side);
                    r /= side;
                }
                zs.push(f.values()[grid.flat(&idx)]);
            }
            let cnt = zs.len() as f64;
            if oscillation {
                let mean = zs.iter().sum::<Complex64>() / cnt;
                zs.iter().map(|z| (z - mean).norm()).sum::<f64>() / cnt
            } else {
                zs.iter().map(|z| z.norm()).sum::<f64>() / cnt
            }
        });
        best = vals.into_iter().fold(best, f64::max);
    }
    Ok(best)
}

/// `|| f(tau, nu) ||_{l^p_tau l^q_nu}`: `l^p` over `tau` first, then `l^q`
/// over `nu`. `values` is row-major with `tau` as the row index.
pub fn mixed_norm(values: &[f64], rows: usize, cols: usize, p: f64, q: f64) -> Result<f64> {
    if values.len() != rows * cols {
        return Err(Error::Shape("array size does not match rows x cols".into()));
    }
    let inner: Vec<f64> = (0..cols)
        .map(|nu| {
            let col: Vec<f64> = (0..rows).map(|t| values[t * cols + nu]).collect();
            seq_norm(&col, p)
        })
        .collect();
    Ok(seq_norm(&inner, q))
}

/// `|| || f(tau, nu) ||_{l^q_nu} ||_{l^r_tau}`.
pub fn mixed_norm_nu_first(values: &[f64], rows: usize, cols: usize, q: f64, r: f64) -> Result<f64> {
    if values.len() != rows * cols {
        return Err(Error::Shape("array size does not match rows x cols".into()));
    }
    let inner: Vec<f64> = (0..rows).map(|t| seq_norm(&values[t * cols..(t + 1) * cols], q)).collect();
    Ok(seq_norm(&inner, r))
}

/// Besov-type symbol norm
/// `|| 2^{s.k} || W^{-1} Delta_k sigma ||_{L^2_ul} ||_{l^t_k}`
/// over the dyadic multi-indices `k = (k_0, ..., k_N)`.
pub fn besov_symbol_norm(sym: &SampledSymbol, weight: &WeightSpec, s: &[f64], t: f64) -> Result<f64> {
    let nin = sym.inputs();
    if s.len() != nin + 1 {
        return Err(Error::Shape(format!("{} smoothness indices for {} blocks", s.len(), nin + 1)));
    }
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("outer exponent t = {t} must be positive")));
    }
    let lp_x = LPPartition::new(sym.grid_x())?;
    let lp_xi = LPPartition::new(sym.grid_xi())?;
    let kx = lp_x.k_max();
    let kxi = lp_xi.k_max();
    let n = sym.dim();
    let gxi = *sym.grid_xi();
    let per_x = gxi.len().pow(nin as u32);
    let winv: Vec<f64> = (0..per_x)
        .map(|t| {
            let mut rem = t;
            let mut xi = vec![0.0; n * nin];
            for j in (0..nin).rev() {
                let c = gxi.point_at(rem % gxi.len());
                rem /= gxi.len();
                xi[j * n..(j + 1) * n].copy_from_slice(&c[..n]);
            }
            1.0 / weight.eval(&xi, n)
        })
        .collect();
    if winv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("weight vanishes on the sampled frequencies".into()));
    }
    let spectrum = SymbolSpectrum::new(sym);
    let tables_x: Vec<Vec<f64>> = (0..=kx).map(|k| lp_x.raw_table(k)).collect();
    let tables_xi: Vec<Vec<f64>> = (0..=kxi).map(|k| lp_xi.raw_table(k)).collect();
    let count = (kx + 1) * (kxi + 1).pow(nin as u32);
    let terms = par::try_map_range(count, |idx| -> Result<f64> {
        let mut rem = idx;
        let mut ks = vec![0usize; nin + 1];
        for j in (1..=nin).rev() {
            ks[j] = rem % (kxi + 1);
            rem /= kxi + 1;
        }
        ks[0] = rem;
        let mut tables = vec![tables_x[ks[0]].clone()];
        for &k in &ks[1..] {
            tables.push(tables_xi[k].clone());
        }
        let block = spectrum.filter(&tables)?;
        let vals: Vec<Complex64> =
            block.values().iter().enumerate().map(|(i, z)| z * winv[i % per_x]).collect();
        let weighted = SampledSymbol::from_values(*sym.grid_x(), gxi, nin, vals)?;
        let scale: f64 = ks.iter().zip(s).map(|(&k, &sj)| sj * k as f64).sum::<f64>().exp2();
        Ok(scale * symbol_l2ul_norm(&weighted)?)
    })?;
    Ok(seq_norm(&terms, t))
}
