//! Symbols sampled on a product grid `grid_x x grid_xi^N`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft_axes, signed_of_raw, Direction, Grid, MAX_DIM};
use crate::par;

/// Samples `sigma(x_p, xi_{k_1}, ..., xi_{k_N})` stored row-major with the
/// `x` block outermost. The `xi` variables sit at the physical points of
/// `grid_xi`, so each `xi_j` ranges over `[-L_xi/2, L_xi/2)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSymbol {
    grid_x: Grid,
    grid_xi: Grid,
    inputs: usize,
    values: Vec<Complex64>,
}

impl SampledSymbol {
    pub fn from_fn<F>(grid_x: Grid, grid_xi: Grid, inputs: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Complex64 + Sync + Send,
    {
        check_dims(&grid_x, &grid_xi, inputs)?;
        let n = grid_x.dim();
        let s = grid_xi.len();
        let per_x = s.pow(inputs as u32);
        let rows = par::map_range(grid_x.len(), |p| {
            let x = grid_x.point_at(p);
            let mut xi = vec![0.0; n * inputs];
            let mut row = Vec::with_capacity(per_x);
            for t in 0..per_x {
                let mut rem = t;
                for j in (0..inputs).rev() {
                    let c = grid_xi.point_at(rem % s);
                    rem /= s;
                    xi[j * n..(j + 1) * n].copy_from_slice(&c[..n]);
                }
                row.push(f(&x[..n], &xi));
            }
            row
        });
        Ok(SampledSymbol { grid_x, grid_xi, inputs, values: rows.concat() })
    }

    pub fn from_values(grid_x: Grid, grid_xi: Grid, inputs: usize, values: Vec<Complex64>) -> Result<Self> {
        check_dims(&grid_x, &grid_xi, inputs)?;
        let expect = grid_x.len() * grid_xi.len().pow(inputs as u32);
        if values.len() != expect {
            return Err(Error::Shape(format!("symbol has {} samples, expected {expect}", values.len())));
        }
        Ok(SampledSymbol { grid_x, grid_xi, inputs, values })
    }

    pub fn grid_x(&self) -> &Grid {
        &self.grid_x
    }
    pub fn grid_xi(&self) -> &Grid {
        &self.grid_xi
    }
    pub fn inputs(&self) -> usize {
        self.inputs
    }
    pub fn dim(&self) -> usize {
        self.grid_x.dim()
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    /// Grid of block `b` (0 is `x`, `1..=N` are the `xi_j`).
    pub fn block_grid(&self, b: usize) -> &Grid {
        if b == 0 {
            &self.grid_x
        } else {
            &self.grid_xi
        }
    }
    pub fn shape(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![self.grid_x.res(); n];
        s.extend(std::iter::repeat_n(self.grid_xi.res(), n * self.inputs));
        s
    }
    /// Quadrature weight of one sample.
    pub fn measure(&self) -> f64 {
        self.grid_x.spacing().powi(self.dim() as i32)
            * self.grid_xi.spacing().powi((self.dim() * self.inputs) as i32)
    }
    /// Flat index of each block for a flat sample index.
    pub fn block_indices(&self, flat: usize) -> Vec<usize> {
        let s = self.grid_xi.len();
        let mut out = vec![0; self.inputs + 1];
        let mut rem = flat;
        for j in (1..=self.inputs).rev() {
            out[j] = rem % s;
            rem /= s;
        }
        out[0] = rem;
        out
    }
    /// Multiply pointwise by `g(x, xi)`.
    pub fn map_with_coords<G>(&self, g: G) -> SampledSymbol
    where
        G: Fn(&[f64], &[f64], Complex64) -> Complex64 + Sync + Send,
    {
        let n = self.dim();
        let values = par::map_range(self.values.len(), |t| {
            let b = self.block_indices(t);
            let x = self.grid_x.point_at(b[0]);
            let mut xi = vec![0.0; n * self.inputs];
            for j in 0..self.inputs {
                let c = self.grid_xi.point_at(b[j + 1]);
                xi[j * n..(j + 1) * n].copy_from_slice(&c[..n]);
            }
            g(&x[..n], &xi, self.values[t])
        });
        SampledSymbol { values, ..self.clone() }
    }
}

fn check_dims(grid_x: &Grid, grid_xi: &Grid, inputs: usize) -> Result<()> {
    if grid_x.dim() != grid_xi.dim() {
        return Err(Error::Shape("x and xi grids differ in dimension".into()));
    }
    if inputs == 0 {
        return Err(Error::Parameter("a symbol needs at least one input".into()));
    }
    Ok(())
}

/// Raw DFT of a sampled symbol over all axes, kept for repeated filtering.
#[derive(Debug, Clone)]
pub struct SymbolSpectrum {
    symbol: SampledSymbol,
    raw: Vec<Complex64>,
}

impl SymbolSpectrum {
    pub fn new(sym: &SampledSymbol) -> Self {
        let mut raw = sym.values.clone();
        let shape = sym.shape();
        let axes: Vec<usize> = (0..shape.len()).collect();
        fft_axes(&mut raw, &shape, &axes, Direction::Forward);
        SymbolSpectrum { symbol: sym.clone(), raw }
    }

    pub fn symbol(&self) -> &SampledSymbol {
        &self.symbol
    }

    /// Apply the Fourier multiplier `prod_b m_b(y_b)` where `y_b` is the
    /// dual variable of block `b`. Each table holds `m_b` at the raw DFT
    /// ordering of its block. Raw ordering is used directly: the phase
    /// factors of the centered transform cancel for multipliers.
    pub fn filter(&self, tables: &[Vec<f64>]) -> Result<SampledSymbol> {
        let sym = &self.symbol;
        if tables.len() != sym.inputs + 1 {
            return Err(Error::Shape("one multiplier table per block is required".into()));
        }
        for (b, t) in tables.iter().enumerate() {
            if t.len() != sym.block_grid(b).len() {
                return Err(Error::Shape(format!("multiplier table {b} has wrong length")));
            }
        }
        let mut data: Vec<Complex64> = par::map_range(self.raw.len(), |t| {
            let b = sym.block_indices(t);
            let mut w = 1.0;
            for (bi, &ix) in b.iter().enumerate() {
                w *= tables[bi][ix];
                if w == 0.0 {
                    break;
                }
            }
            self.raw[t] * w
        });
        let shape = sym.shape();
        let axes: Vec<usize> = (0..shape.len()).collect();
        fft_axes(&mut data, &shape, &axes, Direction::Inverse);
        let s = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
        Ok(SampledSymbol { values: data, ..sym.clone() })
    }
}

/// Tabulate `m(y)` at the raw DFT ordering of a grid, with `y` the dual
/// variable `2 pi s / L` of the grid's physical axis.
pub fn raw_multiplier_table<M: Fn(&[f64]) -> f64>(grid: &Grid, m: M) -> Vec<f64> {
    let n = grid.dim();
    let res = grid.res();
    let dy = grid.freq_spacing();
    (0..grid.len())
        .map(|r| {
            let mr = grid.multi(r);
            let mut y = [0.0; MAX_DIM];
            for a in 0..n {
                y[a] = signed_of_raw(mr[a], res) as f64 * dy;
            }
            m(&y[..n])
        })
        .collect()
}
