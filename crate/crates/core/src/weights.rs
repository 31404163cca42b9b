//! Weights on `(R^n)^N`, lattice weights on `(Z^n)^N`, and numerical
//! diagnostics for the multilinear class `B_N` and the moderate class.
//!
//! A lattice weight `V` belongs to `B_N` when
//! `sum_nu V(nu) A_0(nu_1 + ... + nu_N) prod_j A_j(nu_j) <= c prod_j ||A_j||_2`
//! for all nonnegative `A_j`. The estimators here compute the best constant
//! on a truncation `[-M, M]^n` of every block.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bump::{euclid, japanese};
use crate::error::{Error, Result};
use crate::fit::pairwise_sum;

/// Nonnegative values on `([-R, R]^n)^blocks`, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSeq {
    pub dim: usize,
    pub radius: usize,
    pub blocks: usize,
    pub values: Vec<f64>,
}

impl LatticeSeq {
    pub fn points_per_block(dim: usize, radius: usize) -> usize {
        (2 * radius + 1).pow(dim as u32)
    }

    pub fn new(dim: usize, radius: usize, blocks: usize, values: Vec<f64>) -> Result<Self> {
        let s = LatticeSeq { dim, radius, blocks, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.blocks == 0 {
            return Err(Error::Parameter("lattice sequence needs dim >= 1 and blocks >= 1".into()));
        }
        let expect = Self::points_per_block(self.dim, self.radius).pow(self.blocks as u32);
        if self.values.len() != expect {
            return Err(Error::Shape(format!("{} values, expected {expect}", self.values.len())));
        }
        if self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Parameter("lattice values must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Tabulate `f` on the truncation.
    pub fn from_fn<F: FnMut(&[i64]) -> f64>(dim: usize, radius: usize, blocks: usize, mut f: F) -> Result<Self> {
        let total = Self::points_per_block(dim, radius).pow(blocks as u32);
        let mut nu = vec![0i64; dim * blocks];
        let values = (0..total)
            .map(|t| {
                Self::decode_into(dim, radius, blocks, t, &mut nu);
                f(&nu)
            })
            .collect();
        Self::new(dim, radius, blocks, values)
    }

    pub fn point_mass(dim: usize, blocks: usize) -> Self {
        LatticeSeq { dim, radius: 0, blocks, values: vec![1.0] }
    }

    fn decode_into(dim: usize, radius: usize, blocks: usize, t: usize, out: &mut [i64]) {
        let side = 2 * radius + 1;
        let mut rem = t;
        for c in (0..dim * blocks).rev() {
            out[c] = (rem % side) as i64 - radius as i64;
            rem /= side;
        }
    }

    /// Lattice point of a flat index.
    pub fn point(&self, t: usize) -> Vec<i64> {
        let mut nu = vec![0i64; self.dim * self.blocks];
        Self::decode_into(self.dim, self.radius, self.blocks, t, &mut nu);
        nu
    }

    pub fn index(&self, nu: &[i64]) -> Option<usize> {
        if nu.len() != self.dim * self.blocks {
            return None;
        }
        let r = self.radius as i64;
        let side = 2 * self.radius + 1;
        let mut t = 0usize;
        for &v in nu {
            if v < -r || v > r {
                return None;
            }
            t = t * side + (v + r) as usize;
        }
        Some(t)
    }

    pub fn get(&self, nu: &[i64]) -> f64 {
        self.index(nu).map_or(0.0, |t| self.values[t])
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        pairwise_sum(&sq).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        LatticeSeq { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: LatticeSeq = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

/// Anything that can be evaluated at lattice points of `(Z^n)^N`.
pub trait LatticeWeight {
    fn value(&self, nu: &[i64]) -> f64;
}

impl LatticeWeight for LatticeSeq {
    fn value(&self, nu: &[i64]) -> f64 {
        self.get(nu)
    }
}

/// Closure adapter.
pub struct FnWeight<F: Fn(&[i64]) -> f64>(pub F);

impl<F: Fn(&[i64]) -> f64> LatticeWeight for FnWeight<F> {
    fn value(&self, nu: &[i64]) -> f64 {
        (self.0)(nu)
    }
}

/// Weight functions on `(R^n)^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `(1 + |xi_1| + ... + |xi_N|)^m`, `m <= 0`.
    Power { m: f64 },
    /// `prod_j (1 + |xi_j|)^{-a_j}`.
    Product { exponents: Vec<f64> },
    /// Piecewise constant extension of a lattice sample.
    LorentzSample { seq: LatticeSeq },
    /// `sum_mu V(mu) <xi - mu>^{-decay}`.
    Lifted { seq: LatticeSeq, decay: f64 },
    /// Piecewise constant extension of tabulated values.
    Tabulated { seq: LatticeSeq },
}

impl WeightSpec {
    pub fn constant() -> Self {
        WeightSpec::Power { m: 0.0 }
    }

    /// Parse a weight id: `const`, `power:m`, `product:a1,...,aN`,
    /// `lorentz-sample:FILE`, `table:FILE` or `lifted:DECAY:FILE`. Files
    /// hold a JSON [`LatticeSeq`] and are resolved against `base`.
    pub fn from_id(id: &str, base: Option<&Path>) -> Result<Self> {
        let resolve = |f: &str| match base {
            Some(b) if Path::new(f).is_relative() => b.join(f),
            _ => Path::new(f).to_path_buf(),
        };
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("bad number '{s}' in weight id '{id}'")))
        };
        let (head, rest) = id.split_once(':').unwrap_or((id, ""));
        let w = match head {
            "const" if rest.is_empty() => WeightSpec::constant(),
            "power" => WeightSpec::Power { m: num(rest)? },
            "product" => WeightSpec::Product { exponents: rest.split(',').map(num).collect::<Result<_>>()? },
            "lorentz-sample" => WeightSpec::LorentzSample { seq: LatticeSeq::load(resolve(rest))? },
            "table" => WeightSpec::Tabulated { seq: LatticeSeq::load(resolve(rest))? },
            "lifted" => {
                let (d, f) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Parameter(format!("weight id '{id}' needs lifted:DECAY:FILE")))?;
                let seq = LatticeSeq::load(resolve(f))?;
                v_star_lift(&seq, num(d)?)?
            }
            _ => return Err(Error::Parameter(format!("unknown weight id '{id}'"))),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Power { m } if !(*m <= 0.0) => {
                Err(Error::Parameter(format!("power weight exponent {m} must be <= 0")))
            }
            WeightSpec::Product { exponents } if exponents.is_empty() => {
                Err(Error::Parameter("product weight needs at least one exponent".into()))
            }
            WeightSpec::LorentzSample { seq } | WeightSpec::Tabulated { seq } => seq.validate(),
            WeightSpec::Lifted { seq, decay } => {
                seq.validate()?;
                let nn = (seq.dim * seq.blocks) as f64;
                if !(*decay > nn) {
                    return Err(Error::Parameter(format!("lift decay {decay} must exceed N n = {nn}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Evaluate at `xi = (xi_1, ..., xi_N)` with each `xi_j` in `R^n`.
    pub fn eval(&self, xi: &[f64], n: usize) -> f64 {
        match self {
            WeightSpec::Power { m } => {
                let s: f64 = xi.chunks(n).map(euclid).sum();
                (1.0 + s).powf(*m)
            }
            WeightSpec::Product { exponents } => {
                xi.chunks(n).zip(exponents).map(|(b, a)| (1.0 + euclid(b)).powf(-a)).product()
            }
            WeightSpec::LorentzSample { seq } | WeightSpec::Tabulated { seq } => {
                let nu: Vec<i64> = xi.iter().map(|t| (t + 0.5).floor() as i64).collect();
                seq.get(&nu)
            }
            WeightSpec::Lifted { seq, decay } => {
                let mut terms = Vec::new();
                let mut d = vec![0.0; xi.len()];
                for (t, &v) in seq.values.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let mu = seq.point(t);
                    for (c, (x, m)) in d.iter_mut().zip(xi.iter().zip(&mu)) {
                        *c = x - *m as f64;
                    }
                    terms.push(v * japanese(&d).powf(-decay));
                }
                pairwise_sum(&terms)
            }
        }
    }
}

/// A [`WeightSpec`] restricted to the lattice with a known block dimension.
pub struct OnLattice<'a> {
    pub weight: &'a WeightSpec,
    pub dim: usize,
}

impl LatticeWeight for OnLattice<'_> {
    fn value(&self, nu: &[i64]) -> f64 {
        match self.weight {
            WeightSpec::LorentzSample { seq } | WeightSpec::Tabulated { seq } => seq.get(nu),
            w => {
                let xi: Vec<f64> = nu.iter().map(|&v| v as f64).collect();
                w.eval(&xi, self.dim)
            }
        }
    }
}

/// `sum_nu V(nu) A_0(sum nu_j) prod_j A_j(nu_j)`.
pub fn bn_form_value(v: &LatticeSeq, a: &[LatticeSeq]) -> Result<f64> {
    v.validate()?;
    if a.len() != v.blocks + 1 {
        return Err(Error::Shape(format!("{} factors for a weight with {} blocks", a.len(), v.blocks)));
    }
    for aj in a {
        aj.validate()?;
        if aj.blocks != 1 || aj.dim != v.dim {
            return Err(Error::Shape("factors must be single-block sequences of the weight's dimension".into()));
        }
    }
    let n = v.dim;
    let mut terms = Vec::new();
    let mut sum = vec![0i64; n];
    for (t, &w) in v.values.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let nu = v.point(t);
        sum.iter_mut().for_each(|s| *s = 0);
        let mut prod = w;
        for (j, block) in nu.chunks(n).enumerate() {
            for (s, b) in sum.iter_mut().zip(block) {
                *s += b;
            }
            prod *= a[j + 1].get(block);
        }
        prod *= a[0].get(&sum);
        terms.push(prod);
    }
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnEstimate {
    pub radius: usize,
    pub method: Method,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Value after each sweep (alternating) or after polishing (brute).
    pub history: Vec<f64>,
    /// Set when the value overflowed.
    pub diverged: bool,
}

pub const MAX_SWEEPS: usize = 200;
pub const REL_TOL: f64 = 1e-9;
/// Profile levels of the brute-force search.
pub const BRUTE_LEVELS: usize = 8;
const BRUTE_PROFILE_CAP: f64 = 5e6;

/// The form restricted to a truncation, stored as a list of terms.
struct Form {
    blocks: usize,
    points: usize,
    coeff: Vec<f64>,
    // (blocks + 1) indices per term: A_0 slot, then A_1..A_N
    slots: Vec<u32>,
}

impl Form {
    fn build(v: &dyn LatticeWeight, dim: usize, blocks: usize, radius: usize) -> Result<Self> {
        let points = LatticeSeq::points_per_block(dim, radius);
        let total = (points as f64).powi(blocks as i32);
        if total > 5e7 {
            return Err(Error::CostCap { estimate: total, cap: 5e7 });
        }
        let total = total as usize;
        let idx = |p: &[i64]| -> Option<u32> {
            let r = radius as i64;
            let side = 2 * radius + 1;
            let mut t = 0usize;
            for &c in p {
                if c < -r || c > r {
                    return None;
                }
                t = t * side + (c + r) as usize;
            }
            Some(t as u32)
        };
        let mut coeff = Vec::new();
        let mut slots = Vec::new();
        let mut nu = vec![0i64; dim * blocks];
        let mut sum = vec![0i64; dim];
        for t in 0..total {
            LatticeSeq::decode_into(dim, radius, blocks, t, &mut nu);
            let w = v.value(&nu);
            if !(w >= 0.0) {
                return Err(Error::Parameter(format!("weight value {w} at {nu:?} is not nonnegative")));
            }
            if w == 0.0 {
                continue;
            }
            sum.iter_mut().for_each(|s| *s = 0);
            for block in nu.chunks(dim) {
                for (s, b) in sum.iter_mut().zip(block) {
                    *s += b;
                }
            }
            let Some(s0) = idx(&sum) else { continue };
            coeff.push(w);
            slots.push(s0);
            for block in nu.chunks(dim) {
                slots.push(idx(block).unwrap());
            }
        }
        Ok(Form { blocks, points, coeff, slots })
    }

    fn gradient(&self, a: &[Vec<f64>], b: usize) -> Vec<f64> {
        let k = self.blocks + 1;
        let mut g = vec![0.0; self.points];
        for (t, &w) in self.coeff.iter().enumerate() {
            let s = &self.slots[t * k..(t + 1) * k];
            let mut p = w;
            for (c, &ix) in s.iter().enumerate() {
                if c != b {
                    p *= a[c][ix as usize];
                }
            }
            g[s[b] as usize] += p;
        }
        g
    }

    fn value(&self, a: &[Vec<f64>]) -> f64 {
        let k = self.blocks + 1;
        self.coeff
            .iter()
            .enumerate()
            .map(|(t, &w)| self.slots[t * k..(t + 1) * k].iter().enumerate().fold(w, |p, (c, &ix)| p * a[c][ix as usize]))
            .sum()
    }

    /// Cyclic block maximization from `a`; returns (value, sweeps, converged, history).
    fn alternate(&self, a: &mut [Vec<f64>]) -> (f64, usize, bool, Vec<f64>) {
        let mut history = Vec::new();
        let mut prev = 0.0f64;
        for sweep in 1..=MAX_SWEEPS {
            let mut val = 0.0;
            for b in 0..=self.blocks {
                let g = self.gradient(a, b);
                let nrm = norm2(&g);
                if nrm == 0.0 {
                    history.push(0.0);
                    return (0.0, sweep, true, history);
                }
                a[b] = g.iter().map(|x| x / nrm).collect();
                val = nrm;
            }
            history.push(val);
            if !val.is_finite() {
                return (f64::INFINITY, sweep, false, history);
            }
            if sweep > 1 && (val - prev) <= REL_TOL * val {
                return (val, sweep, true, history);
            }
            prev = val;
        }
        (prev, MAX_SWEEPS, false, history)
    }
}

fn norm2(v: &[f64]) -> f64 {
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    pairwise_sum(&sq).sqrt()
}

/// Estimate the best constant of the `B_N` inequality on `[-M, M]^n`
/// truncations of every block.
pub fn bn_constant_estimate(
    v: &dyn LatticeWeight,
    dim: usize,
    blocks: usize,
    radius: usize,
    method: Method,
) -> Result<BnEstimate> {
    if dim == 0 || blocks == 0 {
        return Err(Error::Parameter("dimension and block count must be positive".into()));
    }
    let form = Form::build(v, dim, blocks, radius)?;
    let p = form.points;
    match method {
        Method::Alternating => {
            let mut a = vec![vec![1.0 / (p as f64).sqrt(); p]; blocks + 1];
            let (value, iterations, converged, history) = form.alternate(&mut a);
            Ok(BnEstimate {
                radius,
                method,
                value,
                iterations,
                converged,
                diverged: !value.is_finite(),
                history,
            })
        }
        Method::Brute => brute(&form, radius),
    }
}

fn leading_pair(m: &DMatrix<f64>) -> (f64, Vec<f64>, Vec<f64>) {
    let svd = m.clone().svd(true, true);
    let (i, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, &0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let u = svd.u.as_ref().unwrap().column(i).iter().map(|x| x.abs()).collect();
    let v = svd.v_t.as_ref().unwrap().row(i).iter().map(|x| x.abs()).collect();
    (s, u, v)
}

fn brute(form: &Form, radius: usize) -> Result<BnEstimate> {
    let p = form.points;
    let k = form.blocks + 1;
    match form.blocks {
        1 => {
            // bilinear: the exact maximum is the top singular value
            let mut m = DMatrix::<f64>::zeros(p, p);
            for (t, &w) in form.coeff.iter().enumerate() {
                m[(form.slots[t * k] as usize, form.slots[t * k + 1] as usize)] += w;
            }
            let (s, _, _) = leading_pair(&m);
            Ok(BnEstimate {
                radius,
                method: Method::Brute,
                value: s,
                iterations: 1,
                converged: true,
                diverged: !s.is_finite(),
                history: vec![s],
            })
        }
        2 => {
            let levels = BRUTE_LEVELS + 1;
            let count = (levels as f64).powi(p as i32) - (BRUTE_LEVELS as f64).powi(p as i32);
            if count > BRUTE_PROFILE_CAP {
                return Err(Error::Parameter(format!(
                    "brute search over {count:.3e} profiles is too large; use the alternating method"
                )));
            }
            let mut best = (0.0f64, vec![0.0; p]);
            let mut profile = vec![0usize; p];
            let total = levels.pow(p as u32);
            for t in 0..total {
                let mut rem = t;
                for c in profile.iter_mut() {
                    *c = rem % levels;
                    rem /= levels;
                }
                // profiles are scale invariant: require a full-height entry
                if !profile.contains(&BRUTE_LEVELS) {
                    continue;
                }
                let a1: Vec<f64> = profile.iter().map(|&c| c as f64 / BRUTE_LEVELS as f64).collect();
                let mut m = DMatrix::<f64>::zeros(p, p);
                for (t, &w) in form.coeff.iter().enumerate() {
                    let s = &form.slots[t * k..(t + 1) * k];
                    m[(s[0] as usize, s[2] as usize)] += w * a1[s[1] as usize];
                }
                let (s, _, _) = leading_pair(&m);
                let val = s / norm2(&a1);
                if val > best.0 {
                    best = (val, a1);
                }
            }
            let (bval, a1) = best;
            let nrm = norm2(&a1);
            let a1: Vec<f64> = a1.iter().map(|x| x / nrm).collect();
            let mut m = DMatrix::<f64>::zeros(p, p);
            for (t, &w) in form.coeff.iter().enumerate() {
                let s = &form.slots[t * k..(t + 1) * k];
                m[(s[0] as usize, s[2] as usize)] += w * a1[s[1] as usize];
            }
            let (_, u, v) = leading_pair(&m);
            let mut a = vec![u, a1, v];
            let start = form.value(&a);
            let (polished, sweeps, converged, mut history) = form.alternate(&mut a);
            history.insert(0, start.max(bval));
            let value = polished.max(bval);
            Ok(BnEstimate {
                radius,
                method: Method::Brute,
                value,
                iterations: sweeps,
                converged,
                diverged: !value.is_finite(),
                history,
            })
        }
        _ => Err(Error::Parameter("brute method supports N <= 2 only".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerateReport {
    pub c_est: f64,
    pub m_est: f64,
    pub pass: bool,
    pub samples: usize,
}

/// Sample `W(xi + eta) / W(xi)` on a box and fit the moderate-class
/// inequality `W(xi + eta) <= C W(xi) <eta>^M`.
pub fn moderate_check(
    w: &WeightSpec,
    dim: usize,
    blocks: usize,
    samples: usize,
    box_radius: f64,
    seed: u64,
) -> ModerateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dim * blocks;
    let mut pairs = Vec::with_capacity(samples);
    let mut pass = true;
    for _ in 0..samples {
        let xi: Vec<f64> = (0..d).map(|_| rng.random_range(-box_radius..box_radius)).collect();
        let eta: Vec<f64> = (0..d).map(|_| rng.random_range(-box_radius..box_radius)).collect();
        let sum: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a + b).collect();
        let w0 = w.eval(&xi, dim);
        let w1 = w.eval(&sum, dim);
        if !(w0 > 0.0) || !(w1 > 0.0) || !w0.is_finite() || !w1.is_finite() {
            pass = false;
            continue;
        }
        pairs.push((w1 / w0, euclid(&eta), japanese(&eta)));
    }
    if !pass || pairs.is_empty() {
        return ModerateReport { c_est: f64::INFINITY, m_est: f64::INFINITY, pass: false, samples };
    }
    let mut m_est = 0.0f64;
    for &(r, e, _) in &pairs {
        if e >= 1.0 && r > 1.0 {
            m_est = m_est.max(r.ln() / (1.0 + e).ln());
        }
    }
    let c_est = pairs.iter().map(|&(r, _, j)| r / j.powf(m_est)).fold(0.0, f64::max);
    ModerateReport { c_est, m_est, pass: c_est.is_finite() && m_est.is_finite(), samples }
}

/// `V*(xi) = sum_mu V(mu) <xi - mu>^{-decay}`.
pub fn v_star_lift(v: &LatticeSeq, decay: f64) -> Result<WeightSpec> {
    let w = WeightSpec::Lifted { seq: v.clone(), decay };
    w.validate()?;
    Ok(w)
}

/// `V(-nu_1, ..., -nu_{j-1}, nu_1 + ... + nu_N, -nu_{j+1}, ..., -nu_N)`.
pub struct Transformed<'a> {
    pub inner: &'a dyn LatticeWeight,
    pub dim: usize,
    pub blocks: usize,
    /// Block index, 1-based.
    pub j: usize,
}

impl LatticeWeight for Transformed<'_> {
    fn value(&self, nu: &[i64]) -> f64 {
        let n = self.dim;
        let mut mu: Vec<i64> = nu.iter().map(|v| -v).collect();
        for a in 0..n {
            mu[(self.j - 1) * n + a] = (0..self.blocks).map(|b| nu[b * n + a]).sum();
        }
        self.inner.value(&mu)
    }
}

/// Tensor product `V(nu) V'(nu')` with `nu_j = (nu_j, nu'_j)` in `Z^{d + d'}`.
pub struct Tensor<'a> {
    pub left: &'a dyn LatticeWeight,
    pub right: &'a dyn LatticeWeight,
    pub dim_left: usize,
    pub dim_right: usize,
    pub blocks: usize,
}

impl LatticeWeight for Tensor<'_> {
    fn value(&self, nu: &[i64]) -> f64 {
        let d = self.dim_left + self.dim_right;
        let mut a = Vec::with_capacity(self.dim_left * self.blocks);
        let mut b = Vec::with_capacity(self.dim_right * self.blocks);
        for block in nu.chunks(d) {
            a.extend_from_slice(&block[..self.dim_left]);
            b.extend_from_slice(&block[self.dim_left..]);
        }
        self.left.value(&a) * self.right.value(&b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub estimate: f64,
    pub transformed: f64,
    pub ratio: f64,
}

/// Compare the `B_N` estimates of `V` and its `j`-th transform.
pub fn transform_closure_check(
    v: &dyn LatticeWeight,
    dim: usize,
    blocks: usize,
    j: usize,
    radius: usize,
) -> Result<ClosureReport> {
    if blocks < 2 {
        return Err(Error::Parameter("transform closure needs N >= 2".into()));
    }
    if j == 0 || j > blocks {
        return Err(Error::Range(format!("block index {j} not in 1..={blocks}")));
    }
    let e = bn_constant_estimate(v, dim, blocks, radius, Method::Alternating)?.value;
    let t = Transformed { inner: v, dim, blocks, j };
    let et = bn_constant_estimate(&t, dim, blocks, radius, Method::Alternating)?.value;
    Ok(ClosureReport { estimate: e, transformed: et, ratio: et / e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(dim: usize, radius: usize, blocks: usize) -> LatticeSeq {
        LatticeSeq::from_fn(dim, radius, blocks, |_| 1.0).unwrap()
    }

    fn random_seq(dim: usize, radius: usize, blocks: usize, seed: u64) -> LatticeSeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeSeq::from_fn(dim, radius, blocks, |_| rand::Rng::random_range(&mut rng, 0.0..1.0)).unwrap()
    }

    #[test]
    fn seq_indexing() {
        let s = LatticeSeq::from_fn(1, 2, 2, |nu| (10 * nu[0] + nu[1]) as f64 + 100.0).unwrap();
        assert_eq!(s.get(&[1, -2]), 108.0);
        assert_eq!(s.get(&[3, 0]), 0.0);
        assert_eq!(s.point(s.index(&[-1, 2]).unwrap()), vec![-1, 2]);
        assert!(LatticeSeq::new(1, 1, 1, vec![1.0, -1.0, 0.0]).is_err());
        assert!(LatticeSeq::new(1, 1, 1, vec![1.0]).is_err());
    }

    #[test]
    fn form_point_masses() {
        let v = random_seq(1, 2, 2, 3);
        let delta = LatticeSeq::point_mass(1, 1);
        let val = bn_form_value(&v, &[delta.clone(), delta.clone(), delta]).unwrap();
        assert_eq!(val, v.get(&[0, 0]));
    }

    #[test]
    fn form_counts_lattice_points() {
        // exhaustive oracle: #{|a|, |b|, |a + b| <= M}
        for m in [1usize, 3, 6] {
            let v = ones(1, m, 2);
            let a = ones(1, m, 1);
            let val = bn_form_value(&v, &[a.clone(), a.clone(), a]).unwrap();
            let mi = m as i64;
            let mut count = 0;
            for x in -mi..=mi {
                for y in -mi..=mi {
                    if (x + y).abs() <= mi {
                        count += 1;
                    }
                }
            }
            assert_eq!(val, count as f64);
            // closed form 3M^2 + 3M + 1
            assert_eq!(count, 3 * mi * mi + 3 * mi + 1);
        }
    }

    #[test]
    fn form_shape_errors() {
        let v = ones(1, 1, 2);
        let a = ones(1, 1, 1);
        assert!(matches!(bn_form_value(&v, &[a.clone(), a.clone()]), Err(Error::Shape(_))));
        let b = ones(2, 1, 1);
        assert!(matches!(bn_form_value(&v, &[a.clone(), a, b]), Err(Error::Shape(_))));
    }

    #[test]
    fn n1_constant_weight_estimate_is_one() {
        for m in [4, 8, 16, 32] {
            let v = ones(1, m, 1);
            let e = bn_constant_estimate(&v, 1, 1, m, Method::Alternating).unwrap();
            assert!((e.value - 1.0).abs() < 1e-9, "M={m}: {}", e.value);
            assert!(e.converged);
            let b = bn_constant_estimate(&v, 1, 1, m, Method::Brute).unwrap();
            assert!((b.value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn alternating_matches_brute_on_tiny_instances() {
        let power = WeightSpec::Power { m: -0.5 };
        let product = WeightSpec::Product { exponents: vec![0.3, 0.8] };
        let ones = ones(1, 2, 2);
        let random = random_seq(1, 2, 2, 17);
        let on_power = OnLattice { weight: &power, dim: 1 };
        let on_product = OnLattice { weight: &product, dim: 1 };
        let weights: Vec<&dyn LatticeWeight> = vec![&ones, &on_power, &random, &on_product];
        for w in weights {
            let alt = bn_constant_estimate(w, 1, 2, 2, Method::Alternating).unwrap();
            let br = bn_constant_estimate(w, 1, 2, 2, Method::Brute).unwrap();
            assert!(alt.value <= br.value + 1e-6, "{} > {}", alt.value, br.value);
            assert!((alt.value - br.value).abs() < 1e-6, "{} vs {}", alt.value, br.value);
            assert!(alt.history.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn weight_ids() {
        assert_eq!(WeightSpec::from_id("const", None).unwrap(), WeightSpec::Power { m: 0.0 });
        assert_eq!(WeightSpec::from_id("power:-0.5", None).unwrap(), WeightSpec::Power { m: -0.5 });
        assert_eq!(
            WeightSpec::from_id("product:0.5,0.25", None).unwrap(),
            WeightSpec::Product { exponents: vec![0.5, 0.25] }
        );
        assert!(WeightSpec::from_id("power:1", None).is_err());
        assert!(WeightSpec::from_id("bogus", None).is_err());
        assert!(matches!(WeightSpec::from_id("table:/nonexistent/file.json", None), Err(Error::Io(_))));
    }

    #[test]
    fn weight_formulas() {
        let w = WeightSpec::Power { m: -1.0 };
        assert!((w.eval(&[3.0, -4.0], 1) - 1.0 / 8.0).abs() < 1e-15);
        assert!((w.eval(&[3.0, 4.0], 2) - 1.0 / 6.0).abs() < 1e-15);
        let p = WeightSpec::Product { exponents: vec![1.0, 2.0] };
        assert!((p.eval(&[1.0, -2.0], 1) - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn moderate_examples() {
        let c = moderate_check(&WeightSpec::constant(), 1, 2, 2000, 50.0, 1);
        assert!(c.pass && c.c_est == 1.0 && c.m_est == 0.0);
        for m in [-0.5, -1.0, -2.0] {
            let r = moderate_check(&WeightSpec::Power { m }, 1, 2, 5000, 50.0, 2);
            assert!(r.pass);
            assert!(r.m_est <= m.abs() + 0.1, "m={m}: {r:?}");
            assert!(r.c_est <= 2f64.powf(m.abs() + 1.0), "m={m}: {r:?}");
        }
        let prod = moderate_check(&WeightSpec::Product { exponents: vec![0.3, 0.7] }, 1, 2, 5000, 50.0, 3);
        assert!(prod.pass && prod.m_est <= 1.0 + 0.1);
        let zero = WeightSpec::Tabulated { seq: LatticeSeq::from_fn(1, 1, 2, |_| 0.0).unwrap() };
        assert!(!moderate_check(&zero, 1, 2, 100, 1.0, 4).pass);
    }

    #[test]
    fn lift_examples() {
        let delta = LatticeSeq::point_mass(1, 2);
        let w = v_star_lift(&delta, 3.0).unwrap();
        for xi in [[0.3, -1.2], [4.0, 2.5]] {
            assert!((w.eval(&xi, 1) - japanese(&xi).powf(-3.0)).abs() < 1e-15);
        }
        assert!(v_star_lift(&delta, 2.0).is_err());
        let v = random_seq(1, 2, 2, 8);
        let lifted = v_star_lift(&v, 2.5).unwrap();
        for t in 0..v.values.len() {
            let nu: Vec<f64> = v.point(t).iter().map(|&c| c as f64).collect();
            assert!(lifted.eval(&nu, 1) >= v.values[t]);
        }
        assert!(moderate_check(&lifted, 1, 2, 3000, 10.0, 5).pass);
    }

    #[test]
    fn transform_of_point_mass() {
        let delta = LatticeSeq::point_mass(1, 2);
        let r = transform_closure_check(&delta, 1, 2, 1, 4).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        assert!(transform_closure_check(&delta, 1, 1, 1, 4).is_err());
    }

    #[test]
    fn transform_formula() {
        let v = FnWeight(|nu: &[i64]| (nu[0] * 100 + nu[1] * 10 + nu[2]) as f64);
        let t = Transformed { inner: &v, dim: 1, blocks: 3, j: 2 };
        // (1, 2, 3) -> (-1, 6, -3)
        assert_eq!(t.value(&[1, 2, 3]), -100.0 + 60.0 - 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn form_is_linear_in_v_and_each_block(seed in any::<u64>(), c in 0.0f64..5.0, b in 0usize..3) {
            let v1 = random_seq(1, 2, 2, seed);
            let v2 = random_seq(1, 2, 2, seed ^ 1);
            let a: Vec<LatticeSeq> = (0..3).map(|i| random_seq(1, 2, 1, seed.wrapping_add(10 + i))).collect();
            let vsum = LatticeSeq::new(1, 2, 2, v1.values.iter().zip(&v2.values).map(|(x, y)| x + y).collect()).unwrap();
            let f1 = bn_form_value(&v1, &a).unwrap();
            let f2 = bn_form_value(&v2, &a).unwrap();
            prop_assert!((bn_form_value(&vsum, &a).unwrap() - f1 - f2).abs() <= 1e-12 * (f1 + f2 + 1.0));
            prop_assert!((bn_form_value(&v1.scaled(c), &a).unwrap() - c * f1).abs() <= 1e-12 * (c * f1 + 1.0));
            let mut a2 = a.clone();
            a2[b] = a[b].scaled(c);
            prop_assert!((bn_form_value(&v1, &a2).unwrap() - c * f1).abs() <= 1e-12 * (c * f1 + 1.0));
            // monotone: raising one block never lowers the form
            let mut a3 = a.clone();
            a3[b] = LatticeSeq::new(1, 2, 1, a[b].values.iter().map(|x| x + 0.5).collect()).unwrap();
            prop_assert!(bn_form_value(&v1, &a3).unwrap() >= f1);
        }

        #[test]
        fn form_bounded_by_estimate(seed in any::<u64>()) {
            // the estimate is a (near) supremum of the normalized form
            let v = random_seq(1, 2, 2, seed);
            let est = bn_constant_estimate(&v, 1, 2, 2, Method::Alternating).unwrap().value;
            let a: Vec<LatticeSeq> = (0..3).map(|i| random_seq(1, 2, 1, seed.wrapping_add(100 + i))).collect();
            let f = bn_form_value(&v, &a).unwrap();
            let norms: f64 = a.iter().map(|x| x.l2_norm()).product();
            prop_assert!(f <= est * norms * (1.0 + 1e-6));
        }
    }
}
