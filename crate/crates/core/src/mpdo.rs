//! Evaluation of multilinear pseudo-differential operators
//!
//! `T(f_1, ..., f_N)(x) = (2 pi)^{-Nn} int e^{i x (xi_1 + ... + xi_N)}
//! sigma(x, xi) prod f_j^(xi_j) dxi`
//!
//! by quadrature on the frequency lattice of a periodic grid, together with
//! empirical operator-norm estimation over random test families.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bump::{compact_bump, euclid, japanese, lp_base, plateau, simpson, sinc};
use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, forward_transform, inverse_transform, Field, Grid, Side};
use crate::norms::{amalgam_norm, amalgam_norm_cells, symbol_l2ul_norm, AmalgamParams};
use crate::par;
use crate::sharpness::{slot_multipliers, SlotFamily};
use crate::symbol::SampledSymbol;
use crate::weights::{LatticeSeq, OnLattice, WeightSpec};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

pub const DEFAULT_COST_CAP: f64 = 2e8;

/// Per-variable frequency profile of a separable symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    One,
    /// `exp(-|xi - center|^2 / (2 width^2))`.
    Gaussian { width: f64, center: Vec<f64> },
    /// `<xi>^exponent`.
    Bracket { exponent: f64 },
    /// Flat-top cutoff `phi(|xi| / radius)`.
    Bump { radius: f64 },
    /// `exp(-i shift . xi)`, a translation by `shift`.
    Modulation { shift: Vec<f64> },
    Scale { re: f64, im: f64 },
    Product { factors: Vec<Profile> },
}

impl Profile {
    pub fn eval(&self, xi: &[f64]) -> C {
        match self {
            Profile::One => ONE,
            Profile::Gaussian { width, center } => {
                let d: f64 = xi.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                C::new((-0.5 * d / (width * width)).exp(), 0.0)
            }
            Profile::Bracket { exponent } => C::new(japanese(xi).powf(*exponent), 0.0),
            Profile::Bump { radius } => C::new(lp_base(euclid(xi) / radius), 0.0),
            Profile::Modulation { shift } => {
                let d: f64 = xi.iter().zip(shift).map(|(a, s)| a * s).sum();
                C::from_polar(1.0, -d)
            }
            Profile::Scale { re, im } => C::new(*re, *im),
            Profile::Product { factors } => factors.iter().map(|f| f.eval(xi)).product(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            Profile::Gaussian { width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::Parameter("gaussian width must be positive".into()));
                }
                if center.len() != n {
                    return Err(Error::Shape(format!("gaussian center has {} entries, n = {n}", center.len())));
                }
            }
            Profile::Bump { radius } if !(*radius > 0.0) => {
                return Err(Error::Parameter("bump radius must be positive".into()));
            }
            Profile::Modulation { shift } if shift.len() != n => {
                return Err(Error::Shape(format!("modulation shift has {} entries, n = {n}", shift.len())));
            }
            Profile::Product { factors } => {
                for f in factors {
                    f.check(n)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Cutoffs used by lattice symbols and lattice test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeBump {
    /// Supported in `[-1/2, 1/2]^n`, equal to 1 on `[-1/4, 1/4]^n`.
    Plateau,
    /// Supported in `[-1/4, 1/4]^n`, scaled so its inverse transform has
    /// modulus at least 1 on `[-pi, pi]^n`.
    Narrow,
    /// `prod exp(-1/(1 - 4 t^2))`, supported in `(-1/2, 1/2)^n`.
    Half,
}

impl LatticeBump {
    pub fn eval(self, t: &[f64]) -> f64 {
        match self {
            LatticeBump::Plateau => t.iter().map(|&v| plateau(v, 0.25, 0.5)).product(),
            LatticeBump::Narrow => {
                let s = narrow_scale();
                t.iter().map(|&v| s * compact_bump(4.0 * v)).product()
            }
            LatticeBump::Half => t.iter().map(|&v| compact_bump(2.0 * v)).product(),
        }
    }
}

/// Per-axis factor making `|F^{-1} phi| >= 1` on `[-pi, pi]`.
fn narrow_scale() -> f64 {
    use std::sync::OnceLock;
    static SCALE: OnceLock<f64> = OnceLock::new();
    *SCALE.get_or_init(|| {
        // (2 pi)^{-1} int b(4t) cos(pi t) dt is the minimum over [-pi, pi]
        let v = simpson(|t| compact_bump(4.0 * t) * (PI * t).cos(), -0.25, 0.25, 4000) / (2.0 * PI);
        1.0 / v
    })
}

/// Spatial envelopes for x-modulated symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Envelope {
    One,
    Half,
    Gaussian { width: f64 },
}

impl Envelope {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Envelope::One => 1.0,
            Envelope::Half => LatticeBump::Half.eval(x),
            Envelope::Gaussian { width } => (-0.5 * x.iter().map(|v| v * v).sum::<f64>() / (width * width)).exp(),
        }
    }
}

/// Symbol descriptions. `N` is taken from the number of inputs at
/// evaluation time; variants that fix `N` are validated against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SymbolSpec {
    #[serde(alias = "const")]
    Constant {
        c: f64,
        #[serde(default)]
        c_im: f64,
    },
    Separable { profiles: Vec<Profile> },
    /// Random trigonometric symbol with `supp F sigma` inside
    /// `B_{R_0} x ... x B_{R_N}`.
    BandLimited { radii: Vec<f64>, terms: usize, seed: u64 },
    /// `sum_k c_k prod_j bump(xi_j - k_j)` with coefficients on
    /// `([-R, R]^n)^N`, stored as `[re, im]` pairs.
    Lattice { radius: usize, coeffs: Vec<[f64; 2]>, bump: LatticeBump },
    /// Lattice symbol with coefficients read off a weight.
    WeightLattice { weight: String, radius: usize },
    /// `envelope(x) e^{-i x (xi_1 + ... + xi_N)} inner(xi)`.
    XModulated { envelope: Envelope, inner: Box<SymbolSpec> },
    /// Test symbols of the sharpness experiments.
    Sharpness { family: SlotFamily, a: u32 },
}

impl SymbolSpec {
    pub fn is_x_independent(&self) -> bool {
        !matches!(self, SymbolSpec::BandLimited { .. } | SymbolSpec::XModulated { .. })
    }

    /// Pointwise value; unavailable for grid-defined sharpness symbols.
    pub fn eval_at(&self, x: &[f64], xi: &[f64], n: usize) -> Result<C> {
        Ok(match self {
            SymbolSpec::Constant { c, c_im } => C::new(*c, *c_im),
            SymbolSpec::Separable { profiles } => profiles.iter().zip(xi.chunks(n)).map(|(p, b)| p.eval(b)).product(),
            SymbolSpec::BandLimited { radii, terms, seed } => {
                let bl = BandLimitedTerms::generate(radii, *terms, *seed, n, xi.len() / n)?;
                bl.eval(x, xi)
            }
            SymbolSpec::Lattice { radius, coeffs, bump } => {
                let nu: Vec<i64> = xi.iter().map(|t| (t + 0.5).floor() as i64).collect();
                let seq = coeff_index(*radius, n, xi.len() / n, &nu);
                match seq {
                    Some(t) => {
                        let w: f64 = xi
                            .chunks(n)
                            .zip(nu.chunks(n))
                            .map(|(b, k)| {
                                let d: Vec<f64> = b.iter().zip(k).map(|(u, v)| u - *v as f64).collect();
                                bump.eval(&d)
                            })
                            .product();
                        let c = coeffs.get(t).ok_or_else(|| Error::Shape("lattice coefficient table too short".into()))?;
                        C::new(c[0], c[1]) * w
                    }
                    None => ZERO,
                }
            }
            SymbolSpec::WeightLattice { .. } => {
                return self.resolve(n, xi.len() / n)?.eval_at(x, xi, n);
            }
            SymbolSpec::XModulated { envelope, inner } => {
                let s: f64 = (0..n).map(|a| x[a] * xi.iter().skip(a).step_by(n).sum::<f64>()).sum();
                inner.eval_at(x, xi, n)? * envelope.eval(x) * C::from_polar(1.0, -s)
            }
            SymbolSpec::Sharpness { .. } => {
                return Err(Error::Type("sharpness symbols are defined on a grid only".into()));
            }
        })
    }

    /// Replace weight-defined lattice symbols by explicit coefficients.
    pub fn resolve(&self, n: usize, inputs: usize) -> Result<SymbolSpec> {
        Ok(match self {
            SymbolSpec::WeightLattice { weight, radius } => {
                let w = WeightSpec::from_id(weight, None)?;
                let seq = LatticeSeq::from_fn(n, *radius, inputs, |nu| {
                    crate::weights::LatticeWeight::value(&OnLattice { weight: &w, dim: n }, nu)
                })?;
                lattice_spec(&seq, LatticeBump::Plateau)
            }
            SymbolSpec::XModulated { envelope, inner } => {
                SymbolSpec::XModulated { envelope: envelope.clone(), inner: Box::new(inner.resolve(n, inputs)?) }
            }
            s => s.clone(),
        })
    }

    /// Sample on a product grid (used for symbol norms).
    pub fn sample(&self, grid_x: &Grid, grid_xi: &Grid, inputs: usize) -> Result<SampledSymbol> {
        let n = grid_x.dim();
        let spec = self.resolve(n, inputs)?;
        if let SymbolSpec::BandLimited { radii, terms, seed } = &spec {
            let bl = BandLimitedTerms::generate(radii, *terms, *seed, n, inputs)?;
            return SampledSymbol::from_fn(*grid_x, *grid_xi, inputs, |x, xi| bl.eval(x, xi));
        }
        // surface evaluation errors before the parallel fill
        let x0 = vec![0.0; n];
        let xi0 = vec![0.0; n * inputs];
        spec.eval_at(&x0, &xi0, n)?;
        SampledSymbol::from_fn(*grid_x, *grid_xi, inputs, |x, xi| spec.eval_at(x, xi, n).unwrap_or(ZERO))
    }
}

fn coeff_index(radius: usize, n: usize, inputs: usize, nu: &[i64]) -> Option<usize> {
    let r = radius as i64;
    let side = 2 * radius + 1;
    if nu.len() != n * inputs {
        return None;
    }
    let mut t = 0usize;
    for &v in nu {
        if v < -r || v > r {
            return None;
        }
        t = t * side + (v + r) as usize;
    }
    Some(t)
}

fn lattice_spec(seq: &LatticeSeq, bump: LatticeBump) -> SymbolSpec {
    SymbolSpec::Lattice { radius: seq.radius, coeffs: seq.values.iter().map(|&v| [v, 0.0]).collect(), bump }
}

/// Explicit terms of a band-limited symbol:
/// `sigma(x, xi) = sum_t c_t e^{i (R_0 y_t . x + sum_j R_j z_jt . xi_j)} prod_j E(R_j xi_j)`
/// with `E(xi) = prod_a sinc(xi_a / 4)^2`, `|y_t| <= 1`, `|z_jt| <= 1/4`.
#[derive(Debug, Clone)]
pub struct BandLimitedTerms {
    radii: Vec<f64>,
    n: usize,
    coeff: Vec<C>,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

impl BandLimitedTerms {
    pub fn generate(radii: &[f64], terms: usize, seed: u64, n: usize, inputs: usize) -> Result<Self> {
        if radii.len() != inputs + 1 {
            return Err(Error::Shape(format!("{} radii for {} inputs", radii.len(), inputs)));
        }
        if radii.iter().any(|r| !(*r >= 1.0)) {
            return Err(Error::Parameter("band-limit radii must be at least 1".into()));
        }
        if terms == 0 {
            return Err(Error::Parameter("band-limited symbol needs at least one term".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ball = |r: f64, rng: &mut ChaCha8Rng| loop {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-r..r)).collect();
            if euclid(&v) <= r {
                break v;
            }
        };
        let mut coeff = Vec::with_capacity(terms);
        let mut y = Vec::with_capacity(terms);
        let mut z = Vec::with_capacity(terms);
        let scale = 1.0 / (terms as f64).sqrt();
        for _ in 0..terms {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            coeff.push(C::new(re, im) * scale);
            y.push(ball(1.0, &mut rng));
            let mut zt = Vec::with_capacity(n * inputs);
            for _ in 0..inputs {
                zt.extend(ball(0.25, &mut rng));
            }
            z.push(zt);
        }
        Ok(BandLimitedTerms { radii: radii.to_vec(), n, coeff, y, z })
    }

    pub fn terms(&self) -> usize {
        self.coeff.len()
    }

    /// x factor of term `t`.
    pub fn x_factor(&self, t: usize, x: &[f64]) -> C {
        let d: f64 = x.iter().zip(&self.y[t]).map(|(a, b)| a * b).sum();
        self.coeff[t] * C::from_polar(1.0, self.radii[0] * d)
    }

    /// Factor of term `t` in `xi_j` (`j` 0-based input index).
    pub fn xi_factor(&self, t: usize, j: usize, xi: &[f64]) -> C {
        let n = self.n;
        let r = self.radii[j + 1];
        let z = &self.z[t][j * n..(j + 1) * n];
        let d: f64 = xi.iter().zip(z).map(|(a, b)| a * b).sum();
        let env: f64 = xi.iter().map(|v| sinc(r * v / 4.0).powi(2)).product();
        C::from_polar(env, r * d)
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C {
        let n = self.n;
        (0..self.terms())
            .map(|t| {
                let mut v = self.x_factor(t, x);
                for (j, b) in xi.chunks(n).enumerate() {
                    v *= self.xi_factor(t, j, b);
                }
                v
            })
            .sum()
    }
}

enum Kind {
    /// `prod_j m_j(xi_j)`; x-independent.
    Separable { factors: Vec<Vec<C>> },
    /// `sum_t x_t(x) prod_j m_tj(xi_j)`.
    Rank { x: Vec<Vec<C>>, xi: Vec<Vec<Vec<C>>> },
    /// Coefficient lookup times bump weights; x-independent.
    Lattice { radius: usize, coeffs: Vec<C>, slot: Vec<Option<Vec<i64>>>, weight: Vec<f64> },
    /// `env(x) e^{-i x . sum xi} inner(xi)` with an x-independent inner kind.
    Modulated { env: Vec<C>, inner: Box<Kind> },
}

/// A symbol tabulated on the frequency lattice of one grid.
pub struct PreparedSymbol {
    grid: Grid,
    inputs: usize,
    kind: Kind,
}

impl PreparedSymbol {
    pub fn new(spec: &SymbolSpec, grid: &Grid, inputs: usize) -> Result<Self> {
        if inputs == 0 {
            return Err(Error::Parameter("at least one input function is required".into()));
        }
        let spec = spec.resolve(grid.dim(), inputs)?;
        let kind = build_kind(&spec, grid, inputs)?;
        Ok(PreparedSymbol { grid: *grid, inputs, kind })
    }

    pub fn is_x_independent(&self) -> bool {
        matches!(self.kind, Kind::Separable { .. } | Kind::Lattice { .. })
    }

    fn value(&self, p: usize, ks: &[usize]) -> C {
        value_of(&self.kind, &self.grid, p, ks)
    }

    fn rank(&self) -> usize {
        match &self.kind {
            Kind::Rank { x, .. } => x.len(),
            _ => 1,
        }
    }
}

fn value_of(kind: &Kind, grid: &Grid, p: usize, ks: &[usize]) -> C {
    match kind {
        Kind::Separable { factors } => factors.iter().zip(ks).map(|(f, &k)| f[k]).product(),
        Kind::Rank { x, xi } => x
            .iter()
            .zip(xi)
            .map(|(xt, tabs)| tabs.iter().zip(ks).fold(xt[p], |acc, (tab, &k)| acc * tab[k]))
            .sum(),
        Kind::Lattice { radius, coeffs, slot, weight } => {
            let mut nu = Vec::with_capacity(ks.len() * grid.dim());
            let mut w = 1.0;
            for &k in ks {
                match &slot[k] {
                    Some(v) => nu.extend_from_slice(v),
                    None => return ZERO,
                }
                w *= weight[k];
            }
            match coeff_index(*radius, grid.dim(), ks.len(), &nu) {
                Some(t) => coeffs[t] * w,
                None => ZERO,
            }
        }
        Kind::Modulated { env, inner } => {
            let n = grid.dim();
            let x = grid.point_at(p);
            let mut s = 0.0;
            for &k in ks {
                let xi = grid.freq_at(k);
                for a in 0..n {
                    s += x[a] * xi[a];
                }
            }
            env[p] * C::from_polar(1.0, -s) * value_of(inner, grid, 0, ks)
        }
    }
}

fn freq_table<F: Fn(&[f64]) -> C>(grid: &Grid, f: F) -> Vec<C> {
    let n = grid.dim();
    (0..grid.len()).map(|i| f(&grid.freq_at(i)[..n])).collect()
}

fn build_kind(spec: &SymbolSpec, grid: &Grid, inputs: usize) -> Result<Kind> {
    let n = grid.dim();
    Ok(match spec {
        SymbolSpec::Constant { c, c_im } => {
            let mut factors = vec![vec![ONE; grid.len()]; inputs];
            for v in factors[0].iter_mut() {
                *v = C::new(*c, *c_im);
            }
            Kind::Separable { factors }
        }
        SymbolSpec::Separable { profiles } => {
            if profiles.len() != inputs {
                return Err(Error::Shape(format!("{} profiles for {inputs} inputs", profiles.len())));
            }
            for p in profiles {
                p.check(n)?;
            }
            Kind::Separable { factors: profiles.iter().map(|p| freq_table(grid, |xi| p.eval(xi))).collect() }
        }
        SymbolSpec::BandLimited { radii, terms, seed } => {
            let bl = BandLimitedTerms::generate(radii, *terms, *seed, n, inputs)?;
            let x = (0..bl.terms())
                .map(|t| (0..grid.len()).map(|p| bl.x_factor(t, &grid.point_at(p)[..n])).collect())
                .collect();
            let xi = (0..bl.terms())
                .map(|t| (0..inputs).map(|j| freq_table(grid, |v| bl.xi_factor(t, j, v))).collect())
                .collect();
            Kind::Rank { x, xi }
        }
        SymbolSpec::Lattice { radius, coeffs, bump } => {
            let expect = LatticeSeq::points_per_block(n, *radius).pow(inputs as u32);
            if coeffs.len() != expect {
                return Err(Error::Shape(format!("{} lattice coefficients, expected {expect}", coeffs.len())));
            }
            if (*radius as f64) + 0.5 > grid.max_freq() {
                return Err(Error::Range(format!(
                    "lattice radius {radius} exceeds the grid frequency range {:.3}",
                    grid.max_freq()
                )));
            }
            let mut slot = Vec::with_capacity(grid.len());
            let mut weight = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let xi = grid.freq_at(i);
                let nu: Vec<i64> = xi[..n].iter().map(|t| (t + 0.5).floor() as i64).collect();
                let d: Vec<f64> = xi[..n].iter().zip(&nu).map(|(a, b)| a - *b as f64).collect();
                let w = bump.eval(&d);
                if w == 0.0 {
                    slot.push(None);
                } else {
                    slot.push(Some(nu));
                }
                weight.push(w);
            }
            Kind::Lattice {
                radius: *radius,
                coeffs: coeffs.iter().map(|c| C::new(c[0], c[1])).collect(),
                slot,
                weight,
            }
        }
        SymbolSpec::WeightLattice { .. } => unreachable!("resolved before tabulation"),
        SymbolSpec::XModulated { envelope, inner } => {
            if !inner.is_x_independent() {
                return Err(Error::Type("the inner symbol of an x-modulated symbol must be x-independent".into()));
            }
            let env = (0..grid.len()).map(|p| C::new(envelope.eval(&grid.point_at(p)[..n]), 0.0)).collect();
            Kind::Modulated { env, inner: Box::new(build_kind(inner, grid, inputs)?) }
        }
        SymbolSpec::Sharpness { family, a } => Kind::Separable { factors: slot_multipliers(grid, *family, *a, inputs)? },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPath {
    /// Sum over frequency tuples at every output point.
    Direct,
    /// Group tuples by their frequency sum first (x-independent symbols).
    SumFrequency,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub path: EvalPath,
    pub cost_cap: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { path: EvalPath::Auto, cost_cap: DEFAULT_COST_CAP }
    }
}

fn check_inputs(grid: Option<&Grid>, fs: &[Field]) -> Result<Grid> {
    let first = fs.first().ok_or_else(|| Error::Parameter("no input functions".into()))?;
    let g = *first.grid();
    if let Some(pg) = grid {
        if !pg.same_as(&g) {
            return Err(Error::Shape("symbol was prepared on a different grid".into()));
        }
    }
    for f in fs {
        if !f.grid().same_as(&g) {
            return Err(Error::Shape("input functions live on different grids".into()));
        }
        if f.side() != Side::Physical {
            return Err(Error::Shape("input functions must be physical fields".into()));
        }
    }
    Ok(g)
}

/// Estimated inner evaluations for a path.
pub fn cost_estimate(sym: &PreparedSymbol, path: EvalPath) -> f64 {
    let s = sym.grid.len() as f64;
    let tuples = s.powi(sym.inputs as i32);
    match path {
        EvalPath::SumFrequency => {
            let w = (sym.inputs * (sym.grid.res() - 1) + 1) as f64;
            tuples + s * w.powi(sym.grid.dim() as i32)
        }
        _ => s * tuples * sym.rank() as f64,
    }
}

/// `T_sigma(f_1, ..., f_N)` with default options.
pub fn evaluate(spec: &SymbolSpec, fs: &[Field]) -> Result<Field> {
    evaluate_with(spec, fs, EvalOptions::default())
}

pub fn evaluate_with(spec: &SymbolSpec, fs: &[Field], opts: EvalOptions) -> Result<Field> {
    let g = check_inputs(None, fs)?;
    let sym = PreparedSymbol::new(spec, &g, fs.len())?;
    evaluate_prepared(&sym, fs, opts)
}

pub fn evaluate_prepared(sym: &PreparedSymbol, fs: &[Field], opts: EvalOptions) -> Result<Field> {
    let g = check_inputs(Some(&sym.grid), fs)?;
    if fs.len() != sym.inputs {
        return Err(Error::Shape(format!("{} inputs for a symbol prepared with {}", fs.len(), sym.inputs)));
    }
    let path = match opts.path {
        EvalPath::Auto if sym.is_x_independent() => EvalPath::SumFrequency,
        EvalPath::Auto => EvalPath::Direct,
        EvalPath::SumFrequency if !sym.is_x_independent() => {
            return Err(Error::Type("the sum-frequency path needs an x-independent symbol".into()));
        }
        p => p,
    };
    let cost = cost_estimate(sym, path);
    if cost > opts.cost_cap {
        return Err(Error::CostCap { estimate: cost, cap: opts.cost_cap });
    }
    let fhat: Vec<Vec<C>> =
        fs.iter().map(|f| forward_transform(f).map(|h| h.into_values())).collect::<Result<_>>()?;
    let scale = g.period().powi(-((g.dim() * sym.inputs) as i32));
    let values = match path {
        EvalPath::SumFrequency => sum_frequency(sym, &fhat, &g),
        _ => direct(sym, &fhat, &g),
    };
    Field::from_values(g, Side::Physical, values.into_iter().map(|v| v * scale).collect())
}

fn direct(sym: &PreparedSymbol, fhat: &[Vec<C>], g: &Grid) -> Vec<C> {
    let n = g.dim();
    let s = g.len();
    let nin = sym.inputs;
    par::map_range(s, |p| {
        let x = g.point_at(p);
        let phase: Vec<C> = (0..s)
            .map(|k| {
                let xi = g.freq_at(k);
                C::from_polar(1.0, (0..n).map(|a| x[a] * xi[a]).sum())
            })
            .collect();
        let gj: Vec<Vec<C>> = fhat.iter().map(|f| f.iter().zip(&phase).map(|(a, b)| a * b).collect()).collect();
        let mut ks = vec![0usize; nin];
        nest(sym, p, &gj, 0, ONE, &mut ks)
    })
}

fn nest(sym: &PreparedSymbol, p: usize, gj: &[Vec<C>], level: usize, prod: C, ks: &mut [usize]) -> C {
    if level == gj.len() {
        return prod * sym.value(p, ks);
    }
    let mut acc = ZERO;
    for (k, &v) in gj[level].iter().enumerate() {
        if v == ZERO {
            continue;
        }
        ks[level] = k;
        acc += nest(sym, p, gj, level + 1, prod * v, ks);
    }
    acc
}

fn sum_frequency(sym: &PreparedSymbol, fhat: &[Vec<C>], g: &Grid) -> Vec<C> {
    let n = g.dim();
    let s = g.len();
    let nin = sym.inputs;
    let half = (g.res() / 2) as i64;
    let width = nin * (g.res() - 1) + 1;
    let offset = nin as i64 * half;
    let mut d = vec![ZERO; width.pow(n as u32)];
    let kidx: Vec<[i64; 2]> = (0..s).map(|k| g.freq_indices_at(k)).collect();
    let total = s.pow(nin as u32);
    let mut ks = vec![0usize; nin];
    for t in 0..total {
        let mut rem = t;
        for j in (0..nin).rev() {
            ks[j] = rem % s;
            rem /= s;
        }
        let mut prod = ONE;
        for (j, &k) in ks.iter().enumerate() {
            prod *= fhat[j][k];
            if prod == ZERO {
                break;
            }
        }
        if prod == ZERO {
            continue;
        }
        let v = prod * sym.value(0, &ks);
        let mut idx = 0usize;
        for a in 0..n {
            let sa: i64 = ks.iter().map(|&k| kidx[k][a]).sum::<i64>() + offset;
            idx = idx * width + sa as usize;
        }
        d[idx] += v;
    }
    let dw = g.freq_spacing();
    par::map_range(s, |p| {
        let x = g.point_at(p);
        let mut acc = ZERO;
        for (idx, &v) in d.iter().enumerate() {
            if v == ZERO {
                continue;
            }
            let mut rem = idx;
            let mut dot = 0.0;
            for a in (0..n).rev() {
                let sa = (rem % width) as i64 - offset;
                rem /= width;
                dot += x[a] * sa as f64 * dw;
            }
            acc += v * C::from_polar(1.0, dot);
        }
        acc
    })
}

/// `prod_j m_j(D) f_j` for separable x-independent symbols.
pub fn evaluate_separable_fast(spec: &SymbolSpec, fs: &[Field]) -> Result<Field> {
    let g = check_inputs(None, fs)?;
    let n = g.dim();
    let profiles: Vec<Profile> = match spec {
        SymbolSpec::Separable { profiles } => profiles.clone(),
        SymbolSpec::Constant { c, c_im } => {
            let mut v = vec![Profile::One; fs.len()];
            v[0] = Profile::Scale { re: *c, im: *c_im };
            v
        }
        _ => return Err(Error::Type("the fast path needs a separable x-independent symbol".into())),
    };
    if profiles.len() != fs.len() {
        return Err(Error::Shape(format!("{} profiles for {} inputs", profiles.len(), fs.len())));
    }
    let mut out: Option<Field> = None;
    for (p, f) in profiles.iter().zip(fs) {
        p.check(n)?;
        let part = apply_multiplier(f, |xi| p.eval(xi))?;
        out = Some(match out {
            None => part,
            Some(acc) => acc.mul(&part)?,
        });
    }
    Ok(out.expect("at least one input"))
}

/// Lattice symbol `sum_k V(k) prod_j phi~(xi_j - k_j)`.
pub fn build_lattice_symbol(v: &LatticeSeq, grid: &Grid) -> Result<SymbolSpec> {
    v.validate()?;
    if v.dim != grid.dim() {
        return Err(Error::Shape("lattice dimension differs from the grid".into()));
    }
    if v.radius as f64 + 0.5 > grid.max_freq() {
        return Err(Error::Range(format!(
            "lattice radius {} exceeds the grid frequency range {:.3}",
            v.radius,
            grid.max_freq()
        )));
    }
    Ok(lattice_spec(v, LatticeBump::Plateau))
}

/// Number of periods `P` with `L = 2 pi P`.
pub fn two_pi_periods(grid: &Grid) -> Result<usize> {
    let p = grid.period() / (2.0 * PI);
    let r = p.round();
    if r < 1.0 || (p - r).abs() > 1e-9 * p {
        return Err(Error::Alignment(format!("period {} is not a multiple of 2 pi", grid.period())));
    }
    Ok(r as usize)
}

/// `f(x) = sum_nu A(nu) e^{i nu x} F^{-1} phi(x)` built on the frequency side.
pub fn build_lattice_test_function(a: &LatticeSeq, grid: &Grid) -> Result<Field> {
    a.validate()?;
    two_pi_periods(grid)?;
    if a.blocks != 1 || a.dim != grid.dim() {
        return Err(Error::Shape("test function coefficients need one block of the grid dimension".into()));
    }
    if a.radius as f64 + 0.25 >= grid.max_freq() {
        return Err(Error::Range(format!("radius {} exceeds the grid frequency range", a.radius)));
    }
    let n = grid.dim();
    let fh = Field::from_fn(*grid, Side::Frequency, |xi| {
        let nu: Vec<i64> = xi.iter().map(|t| t.round() as i64).collect();
        let d: Vec<f64> = xi.iter().zip(&nu).map(|(x, v)| x - *v as f64).collect();
        C::new(a.get(&nu[..n]) * LatticeBump::Narrow.eval(&d), 0.0)
    });
    inverse_transform(&fh)
}

/// `d_k = sum_{nu_1 + ... + nu_N = k} V(nu) prod_j A_j(nu_j)`.
pub fn lattice_dk(v: &LatticeSeq, a: &[LatticeSeq]) -> Result<Vec<(Vec<i64>, f64)>> {
    v.validate()?;
    if a.len() != v.blocks {
        return Err(Error::Shape(format!("{} sequences for {} blocks", a.len(), v.blocks)));
    }
    let n = v.dim;
    let mut acc: std::collections::BTreeMap<Vec<i64>, f64> = std::collections::BTreeMap::new();
    for (t, &w) in v.values.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let nu = v.point(t);
        let mut prod = w;
        let mut k = vec![0i64; n];
        for (j, block) in nu.chunks(n).enumerate() {
            prod *= a[j].get(block);
            for (s, b) in k.iter_mut().zip(block) {
                *s += b;
            }
        }
        if prod != 0.0 {
            *acc.entry(k).or_insert(0.0) += prod;
        }
    }
    Ok(acc.into_iter().collect())
}

/// `sum_k d_k e^{i k x} g(x)^N` with `g = F^{-1} phi` on the grid.
pub fn lattice_expansion(dk: &[(Vec<i64>, f64)], grid: &Grid, inputs: usize) -> Result<Field> {
    let zero = LatticeSeq::point_mass(grid.dim(), 1);
    let g = build_lattice_test_function(&zero, grid)?;
    let n = grid.dim();
    let values = par::map_range(grid.len(), |p| {
        let x = grid.point_at(p);
        let s: C = dk
            .iter()
            .map(|(k, d)| C::from_polar(*d, (0..n).map(|a| k[a] as f64 * x[a]).sum()))
            .sum();
        s * g.values()[p].powu(inputs as u32)
    });
    Field::from_values(*grid, Side::Physical, values)
}

/// Amalgam norm over cubes of side `2 pi`, used on `2 pi P` periodic grids.
pub fn amalgam_norm_2pi(f: &Field, params: AmalgamParams) -> Result<f64> {
    amalgam_norm_cells(f, params, 2.0 * PI)
}

/// Random test-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Gaussian coefficients on all frequencies with `|xi|_inf <= band`.
    TrigPoly { band: f64 },
    /// Sums of Gaussian wave packets at random positions and frequencies.
    Wavepacket { count: usize, width: f64, band: f64 },
}

impl FamilySpec {
    /// Default family: trigonometric polynomials up to a quarter of the
    /// grid bandwidth.
    pub fn default_for(grid: &Grid) -> Self {
        FamilySpec::TrigPoly { band: grid.max_freq() / 4.0 }
    }

    pub fn sample(&self, grid: &Grid, rng: &mut ChaCha8Rng) -> Result<Field> {
        let n = grid.dim();
        match self {
            FamilySpec::TrigPoly { band } => {
                if !(*band > 0.0) || *band > grid.max_freq() {
                    return Err(Error::Bandwidth(format!("band {band} outside (0, {:.3}]", grid.max_freq())));
                }
                let mut fh = Field::zeros(*grid, Side::Frequency);
                for (i, v) in fh.values_mut().iter_mut().enumerate() {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    if grid.freq_at(i)[..n].iter().all(|t| t.abs() <= *band) {
                        *v = C::new(re, im);
                    }
                }
                inverse_transform(&fh)
            }
            FamilySpec::Wavepacket { count, width, band } => {
                if !(*band >= 0.0) || *band > grid.max_freq() || !(*width > 0.0) || *count == 0 {
                    return Err(Error::Parameter("wave packet family needs count >= 1, width > 0, band in range".into()));
                }
                let l = grid.period();
                let packets: Vec<(Vec<f64>, Vec<f64>, C)> = (0..*count)
                    .map(|_| {
                        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5 * l..0.5 * l)).collect();
                        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-*band..=*band)).collect();
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        (c, w, C::new(re, im))
                    })
                    .collect();
                Ok(Field::from_fn(*grid, Side::Physical, |x| {
                    packets
                        .iter()
                        .map(|(c, w, a)| {
                            let mut r2 = 0.0;
                            let mut ph = 0.0;
                            for ax in 0..n {
                                let d = (x[ax] - c[ax] + 0.5 * l).rem_euclid(l) - 0.5 * l;
                                r2 += d * d;
                                ph += w[ax] * x[ax];
                            }
                            a * C::from_polar((-0.5 * r2 / (width * width)).exp(), ph)
                        })
                        .sum()
                }))
            }
        }
    }
}

/// RNG for trial `t` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub q: Vec<f64>,
    pub r: f64,
}

/// Symbol norm data for the theoretical right-hand side.
#[derive(Debug, Clone)]
pub struct BoundSpec {
    pub weight: WeightSpec,
    pub grid_x: Grid,
    pub grid_xi: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub q: Vec<f64>,
    pub r: f64,
    pub ratios: Vec<f64>,
    pub sup: f64,
    pub skipped: usize,
    pub trials: usize,
    pub seed: u64,
    /// `R_0^{n/2} prod R_j^{n/min(2, q_j)}` for band-limited symbols.
    pub radius_factor: Option<f64>,
    /// `|| W^{-1} sigma ||_{L^2_ul}`.
    pub symbol_norm: Option<f64>,
    pub bound: Option<f64>,
}

/// `R_0^{n/2} prod_j R_j^{n / min(2, q_j)}`.
pub fn prop51_bound_factor(n: usize, radii: &[f64], q: &[f64]) -> Result<f64> {
    if radii.len() != q.len() + 1 {
        return Err(Error::Shape("need one radius per input plus R_0".into()));
    }
    let n = n as f64;
    Ok(radii[0].powf(n / 2.0) * radii[1..].iter().zip(q).map(|(r, qj)| r.powf(n / qj.min(2.0))).product::<f64>())
}

/// `R_0^{n/2} prod_j R_j^{n / p_j}` under the admissibility conditions
/// `1/p_j + 1/q_j - 1/2 >= 0` and `sum_j (1/p_j + 1/q_j - 1/2) = 1/r`.
pub fn prop62_bound_factor(n: usize, radii: &[f64], p: &[f64], q: &[f64], r: f64) -> Result<f64> {
    if radii.len() != p.len() + 1 || p.len() != q.len() {
        return Err(Error::Shape("need matching p, q and radii".into()));
    }
    let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
    let mut total = 0.0;
    for (&pj, &qj) in p.iter().zip(q) {
        if !(2.0..=f64::INFINITY).contains(&pj) || !(2.0..=f64::INFINITY).contains(&qj) {
            return Err(Error::Parameter("p_j and q_j must lie in [2, inf]".into()));
        }
        let e = inv(pj) + inv(qj) - 0.5;
        if e < -1e-12 {
            return Err(Error::Parameter("1/p_j + 1/q_j - 1/2 must be nonnegative".into()));
        }
        total += e;
    }
    if (total - inv(r)).abs() > 1e-12 {
        return Err(Error::Parameter(format!("sum of 1/p_j + 1/q_j - 1/2 is {total}, expected 1/r = {}", inv(r))));
    }
    let n = n as f64;
    Ok(radii[0].powf(n / 2.0) * radii[1..].iter().zip(p).map(|(rj, pj)| rj.powf(n * inv(*pj))).product::<f64>())
}

/// Sample random tuples from `family` and record
/// `||T f||_{(L^2, l^r)} / prod_j ||f_j||_{(L^2, l^{q_j})}`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_bound(
    spec: &SymbolSpec,
    grid: &Grid,
    exps: &Exponents,
    family: &FamilySpec,
    trials: usize,
    seed: u64,
    opts: EvalOptions,
    bound: Option<&BoundSpec>,
) -> Result<BoundednessReport> {
    let nin = exps.q.len();
    if nin == 0 {
        return Err(Error::Parameter("at least one exponent q_j is required".into()));
    }
    let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
    if exps.q.iter().any(|q| !(*q > 0.0)) || !(exps.r > 0.0) {
        return Err(Error::Parameter("exponents must be positive".into()));
    }
    if exps.q.iter().map(|q| inv(*q)).sum::<f64>() < inv(exps.r) - 1e-12 {
        return Err(Error::Parameter("exponents violate sum 1/q_j >= 1/r".into()));
    }
    let sym = PreparedSymbol::new(spec, grid, nin)?;
    let rows = par::try_map_range(trials, |t| -> Result<Option<f64>> {
        let mut rng = trial_rng(seed, t as u64);
        let fs: Vec<Field> = (0..nin).map(|_| family.sample(grid, &mut rng)).collect::<Result<_>>()?;
        let mut den = 1.0;
        for (f, &q) in fs.iter().zip(&exps.q) {
            den *= amalgam_norm(f, AmalgamParams::new(2.0, q))?;
        }
        if !(den > 0.0) {
            return Ok(None);
        }
        let out = evaluate_prepared(&sym, &fs, opts)?;
        Ok(Some(amalgam_norm(&out, AmalgamParams::new(2.0, exps.r))? / den))
    })?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = rows.into_iter().flatten().collect();
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    let (mut radius_factor, mut symbol_norm, mut bnd) = (None, None, None);
    if let (SymbolSpec::BandLimited { radii, .. }, Some(b)) = (spec, bound) {
        let fct = prop51_bound_factor(grid.dim(), radii, &exps.q)?;
        let sampled = spec.sample(&b.grid_x, &b.grid_xi, nin)?;
        let n = grid.dim();
        let weighted = sampled.map_with_coords(|_, xi, v| v / b.weight.eval(xi, n));
        let sn = symbol_l2ul_norm(&weighted)?;
        radius_factor = Some(fct);
        symbol_norm = Some(sn);
        bnd = Some(fct * sn);
    }
    Ok(BoundednessReport {
        q: exps.q.clone(),
        r: exps.r,
        ratios,
        sup,
        skipped,
        trials,
        seed,
        radius_factor,
        symbol_norm,
        bound: bnd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCheck {
    pub pass: bool,
    pub witness: Option<String>,
}

/// Check the exponent system `q_j in [2, inf]`, `r in [2/N, inf]`,
/// `s_0 = n/2`, `n/2 - n/q_j <= s_j <= n/2`,
/// `sum s_j = sum (n/2 - n/q_j) + n/r` and `sum 1/q_j >= 1/r`, in that
/// order. `s` lists `s_0, ..., s_N`.
pub fn theorem61_exponent_check(n: usize, q: &[f64], r: f64, s: &[f64]) -> ExponentCheck {
    const TOL: f64 = 1e-12;
    let fail = |w: String| ExponentCheck { pass: false, witness: Some(w) };
    let nn = q.len();
    if nn == 0 || s.len() != nn + 1 {
        return fail(format!("expected {} smoothness indices, got {}", nn + 1, s.len()));
    }
    let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
    let nf = n as f64;
    for (j, &qj) in q.iter().enumerate() {
        if !(qj >= 2.0) {
            return fail(format!("q_{} = {qj} < 2", j + 1));
        }
    }
    if !(r >= 2.0 / nn as f64 - TOL) {
        return fail(format!("r = {r} < 2/N"));
    }
    if (s[0] - nf / 2.0).abs() > TOL {
        return fail(format!("s_0 = {} != n/2", s[0]));
    }
    for (j, &qj) in q.iter().enumerate() {
        let lo = nf / 2.0 - nf * inv(qj);
        let sj = s[j + 1];
        if sj < lo - TOL {
            return fail(format!("s_{} < n/2 - n/q_{}", j + 1, j + 1));
        }
        if sj > nf / 2.0 + TOL {
            return fail(format!("s_{} > n/2", j + 1));
        }
    }
    let lhs: f64 = s[1..].iter().sum();
    let rhs: f64 = q.iter().map(|&qj| nf / 2.0 - nf * inv(qj)).sum::<f64>() + nf * inv(r);
    if (lhs - rhs).abs() > 1e-9 {
        return fail(format!("sum s_j = {lhs} != sum (n/2 - n/q_j) + n/r = {rhs}"));
    }
    if q.iter().map(|&qj| inv(qj)).sum::<f64>() < inv(r) - TOL {
        return fail("sum 1/q_j < 1/r".into());
    }
    ExponentCheck { pass: true, witness: None }
}

/// Largest `|Delta^alpha sigma| / W` over all multi-orders with block
/// orders `alpha_b <= orders[b]`, using centered differences of step `h`
/// in the frequency variables at the given points (`n = 1` per block).
pub fn derivative_weight_ratio(
    spec: &SymbolSpec,
    weight: &WeightSpec,
    n: usize,
    inputs: usize,
    orders: &[usize],
    points: &[Vec<f64>],
    h: f64,
) -> Result<f64> {
    if orders.len() != inputs {
        return Err(Error::Shape("one derivative order per input".into()));
    }
    let spec = spec.resolve(n, inputs)?;
    let x0 = vec![0.0; n];
    let d = n * inputs;
    // enumerate per-coordinate orders with block totals within bounds
    let mut alphas: Vec<Vec<usize>> = vec![vec![]];
    for c in 0..d {
        let block = c / n;
        let mut next = Vec::new();
        for a in &alphas {
            let used: usize = a.iter().enumerate().filter(|(i, _)| i / n == block).map(|(_, v)| v).sum();
            for o in 0..=(orders[block] - used.min(orders[block])) {
                let mut b = a.clone();
                b.push(o);
                next.push(b);
            }
        }
        alphas = next;
    }
    let mut worst = 0.0f64;
    for xi in points {
        let w = weight.eval(xi, n);
        if !(w > 0.0) {
            return Err(Error::Parameter("weight must be positive at the sample points".into()));
        }
        for alpha in &alphas {
            let mut acc = ZERO;
            // tensor product of centered difference stencils
            let total: usize = alpha.iter().map(|o| o + 1).product();
            for t in 0..total {
                let mut rem = t;
                let mut pt = xi.clone();
                let mut coef = 1.0;
                for (c, &o) in alpha.iter().enumerate() {
                    let i = rem % (o + 1);
                    rem /= o + 1;
                    coef *= binomial(o, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
                    pt[c] += (o as f64 / 2.0 - i as f64) * h;
                }
                acc += spec.eval_at(&x0, &pt, n)? * coef;
            }
            let ord: usize = alpha.iter().sum();
            worst = worst.max(acc.norm() / h.powi(ord as i32) / w);
        }
    }
    Ok(worst)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trig(grid: &Grid, seed: u64) -> Field {
        FamilySpec::default_for(grid).sample(grid, &mut trial_rng(seed, 0)).unwrap()
    }

    #[test]
    fn identity_symbol_gives_product() {
        let g = Grid::new(1, 8.0, 32).unwrap();
        let fs: Vec<Field> = (0..2).map(|s| trig(&g, s)).collect();
        let prod = fs[0].mul(&fs[1]).unwrap();
        for path in [EvalPath::Direct, EvalPath::SumFrequency] {
            let t = evaluate_with(&SymbolSpec::Constant { c: 1.0, c_im: 0.0 }, &fs, EvalOptions { path, ..Default::default() })
                .unwrap();
            assert!(t.rel_max_error(&prod).unwrap() < 1e-10);
        }
    }

    #[test]
    fn modulated_symbol_returns_value_at_origin() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        let f = trig(&g, 3);
        let spec = SymbolSpec::XModulated {
            envelope: Envelope::One,
            inner: Box::new(SymbolSpec::Constant { c: 1.0, c_im: 0.0 }),
        };
        let t = evaluate(&spec, std::slice::from_ref(&f)).unwrap();
        let f0 = f.values()[g.index_of_freq(&[0]).unwrap()];
        for v in t.values() {
            assert!((v - f0).norm() < 1e-10 * f.max_abs());
        }
    }

    #[test]
    fn cost_cap_and_shape_errors() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        let fs: Vec<Field> = (0..2).map(|s| trig(&g, s)).collect();
        let opts = EvalOptions { path: EvalPath::Direct, cost_cap: 1000.0 };
        assert!(matches!(
            evaluate_with(&SymbolSpec::Constant { c: 1.0, c_im: 0.0 }, &fs, opts),
            Err(Error::CostCap { .. })
        ));
        let other = trig(&Grid::new(1, 8.0, 32).unwrap(), 1);
        assert!(matches!(
            evaluate(&SymbolSpec::Constant { c: 1.0, c_im: 0.0 }, &[fs[0].clone(), other]),
            Err(Error::Shape(_))
        ));
        let bl = SymbolSpec::BandLimited { radii: vec![1.0, 1.0, 1.0], terms: 2, seed: 0 };
        assert!(matches!(evaluate_separable_fast(&bl, &fs), Err(Error::Type(_))));
    }

    #[test]
    fn paths_agree_on_lattice_symbol() {
        let g = Grid::new(1, 4.0 * PI, 32).unwrap();
        let v = LatticeSeq::from_fn(1, 2, 2, |nu| 1.0 + (nu[0] - nu[1]).abs() as f64).unwrap();
        let spec = build_lattice_symbol(&v, &g).unwrap();
        let fs: Vec<Field> = (0..2).map(|s| trig(&g, s + 7)).collect();
        let a = evaluate_with(&spec, &fs, EvalOptions { path: EvalPath::Direct, ..Default::default() }).unwrap();
        let b = evaluate_with(&spec, &fs, EvalOptions { path: EvalPath::SumFrequency, ..Default::default() }).unwrap();
        assert!(a.rel_max_error(&b).unwrap() < 1e-11);
    }

    #[test]
    fn lattice_symbol_examples() {
        let g = Grid::new(1, 8.0 * PI, 64).unwrap();
        let delta = LatticeSeq::point_mass(1, 2);
        let spec = build_lattice_symbol(&delta, &g).unwrap();
        assert_eq!(spec.eval_at(&[0.0], &[0.1, -0.2], 1).unwrap(), ONE);
        assert_eq!(spec.eval_at(&[0.0], &[0.6, 0.0], 1).unwrap(), ZERO);
        let big = LatticeSeq::from_fn(1, 20, 1, |_| 1.0).unwrap();
        assert!(matches!(build_lattice_symbol(&big, &Grid::new(1, 8.0, 8).unwrap()), Err(Error::Range(_))));
        assert!(matches!(build_lattice_test_function(&delta, &Grid::new(1, 8.0, 64).unwrap()), Err(Error::Alignment(_))));
    }

    #[test]
    fn narrow_bump_inverse_transform_bounded_below() {
        // |F^{-1} phi| >= 1 on [-pi, pi]: check the continuous transform
        for x in [0.0, 1.0, 2.0, PI] {
            let v = simpson(|t| LatticeBump::Narrow.eval(&[t]) * (x * t).cos(), -0.25, 0.25, 4000) / (2.0 * PI);
            assert!(v >= 1.0 - 1e-9, "x={x}: {v}");
        }
    }

    #[test]
    fn lattice_expansion_matches_evaluate() {
        let g = Grid::new(1, 8.0 * PI, 128).unwrap();
        let v = LatticeSeq::from_fn(1, 3, 2, |nu| 1.0 / (1.0 + (nu[0] + 2 * nu[1]).abs() as f64)).unwrap();
        let a: Vec<LatticeSeq> = (0..2)
            .map(|j| LatticeSeq::from_fn(1, 3, 1, |nu| ((nu[0] + j as i64).abs() % 3) as f64 + 0.5).unwrap())
            .collect();
        let fs: Vec<Field> = a.iter().map(|s| build_lattice_test_function(s, &g).unwrap()).collect();
        let t = evaluate(&build_lattice_symbol(&v, &g).unwrap(), &fs).unwrap();
        let dk = lattice_dk(&v, &a).unwrap();
        let e = lattice_expansion(&dk, &g, 2).unwrap();
        assert!(t.rel_max_error(&e).unwrap() < 1e-10);
    }

    #[test]
    fn dk_direct_sum() {
        let v = LatticeSeq::from_fn(1, 1, 2, |_| 1.0).unwrap();
        let a = vec![LatticeSeq::from_fn(1, 1, 1, |_| 1.0).unwrap(); 2];
        let dk = lattice_dk(&v, &a).unwrap();
        // number of ways to write k as a sum of two entries of {-1, 0, 1}
        let want = [(-2, 1.0), (-1, 2.0), (0, 3.0), (1, 2.0), (2, 1.0)];
        assert_eq!(dk.len(), 5);
        for ((k, d), (wk, wd)) in dk.iter().zip(want) {
            assert_eq!((k[0], *d), (wk, wd));
        }
    }

    #[test]
    fn zero_symbol_gives_zero_ratios() {
        let g = Grid::new(1, 8.0, 32).unwrap();
        let r = empirical_bound(
            &SymbolSpec::Constant { c: 0.0, c_im: 0.0 },
            &g,
            &Exponents { q: vec![2.0, 2.0], r: 1.0 },
            &FamilySpec::default_for(&g),
            5,
            1,
            EvalOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(r.ratios, vec![0.0; 5]);
        assert!(r.sup <= r.ratios.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn exponent_examples() {
        let ok = theorem61_exponent_check(1, &[2.0, 2.0], 1.0, &[0.5, 0.5, 0.5]);
        assert!(ok.pass, "{ok:?}");
        let bad = theorem61_exponent_check(1, &[2.0, f64::INFINITY], 2.0, &[0.5, 0.5, 0.0]);
        assert!(!bad.pass);
        assert_eq!(bad.witness.as_deref(), Some("s_2 < n/2 - n/q_2"));
        assert!(theorem61_exponent_check(1, &[2.0], 2.0, &[0.5, 0.5]).pass);
        assert!(!theorem61_exponent_check(1, &[1.0, 2.0], 1.0, &[0.5, 0.5, 0.5]).pass);
    }

    #[test]
    fn prop62_reduces_to_prop51() {
        for (q, r) in [(vec![2.0, 2.0], 1.0), (vec![4.0, 4.0], 2.0), (vec![2.0, f64::INFINITY], 2.0)] {
            for radii in [vec![1.0, 2.0, 3.0], vec![5.0, 1.5, 8.0]] {
                let a = prop51_bound_factor(1, &radii, &q).unwrap();
                let b = prop62_bound_factor(1, &radii, &[2.0, 2.0], &q, r).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn derivative_bound_dominated_by_lattice_weight() {
        let v = LatticeSeq::from_fn(1, 4, 2, |nu| (1.0 + nu[0].abs() as f64 + nu[1].abs() as f64).powf(-0.5)).unwrap();
        let g = Grid::new(1, 4.0 * PI, 64).unwrap();
        let spec = build_lattice_symbol(&v, &g).unwrap();
        let w = WeightSpec::Tabulated { seq: v };
        let mut rng = trial_rng(5, 0);
        use rand::Rng as _;
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random_range(-3.4..3.4), rng.random_range(-3.4..3.4)])
            .filter(|p: &Vec<f64>| p.iter().all(|t| (t - t.round()).abs() < 0.45))
            .collect();
        let c = derivative_weight_ratio(&spec, &w, 1, 2, &[2, 2], &pts, 1e-3).unwrap();
        // inside a cell sigma = V(nu) prod phi~(xi_j - nu_j), so the ratio is
        // at most the squared sup of the bump derivatives up to order 2
        let h = 1e-3;
        let bump_sup = (-500..=500)
            .map(|i| {
                let t = i as f64 * 1e-3;
                let f = |u: f64| LatticeBump::Plateau.eval(&[u]);
                let d0 = f(t).abs();
                let d1 = ((f(t + h / 2.0) - f(t - h / 2.0)) / h).abs();
                let d2 = ((f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)).abs();
                d0.max(d1).max(d2)
            })
            .fold(0.0, f64::max);
        assert!(c.is_finite() && c > 0.0);
        assert!(c <= 1.01 * bump_sup * bump_sup, "{c} vs {}", bump_sup * bump_sup);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn multilinear_in_each_input(seed in any::<u64>(), c in -2.0f64..2.0, slot in 0usize..2) {
            let g = Grid::new(1, 8.0, 16).unwrap();
            let spec = SymbolSpec::BandLimited { radii: vec![1.0, 2.0, 1.5], terms: 3, seed };
            let fs: Vec<Field> = (0..2).map(|s| trig(&g, seed.wrapping_add(s))).collect();
            let h = trig(&g, seed.wrapping_add(9));
            let base = evaluate(&spec, &fs).unwrap();
            let mut gs = fs.clone();
            gs[slot] = h.clone();
            let other = evaluate(&spec, &gs).unwrap();
            let mut comb = fs.clone();
            comb[slot] = Field::from_values(g, Side::Physical,
                fs[slot].values().iter().zip(h.values()).map(|(a, b)| a * c + b).collect()).unwrap();
            let t = evaluate(&spec, &comb).unwrap();
            let scale = base.max_abs().max(other.max_abs()).max(1e-300);
            for i in 0..g.len() {
                let want = base.values()[i] * c + other.values()[i];
                prop_assert!((t.values()[i] - want).norm() <= 1e-10 * scale);
            }
        }

        #[test]
        fn translation_covariance(seed in any::<u64>(), shift in 1usize..16) {
            let g = Grid::new(1, 8.0, 16).unwrap();
            let spec = SymbolSpec::Separable { profiles: vec![
                Profile::Gaussian { width: 2.0, center: vec![0.5] },
                Profile::Bracket { exponent: -0.5 },
            ]};
            let fs: Vec<Field> = (0..2).map(|s| trig(&g, seed.wrapping_add(s))).collect();
            let roll = |f: &Field| Field::from_values(g, Side::Physical,
                (0..16).map(|i| f.values()[(i + 16 - shift) % 16]).collect()).unwrap();
            let t = evaluate_with(&spec, &fs, EvalOptions { path: EvalPath::Direct, ..Default::default() }).unwrap();
            let ts = evaluate_with(&spec, &fs.iter().map(roll).collect::<Vec<_>>(),
                EvalOptions { path: EvalPath::Direct, ..Default::default() }).unwrap();
            prop_assert!(ts.rel_max_error(&roll(&t)).unwrap() < 1e-9);
        }
    }
}
