//! Counterexample machinery: Wainger-type lacunary superpositions, the
//! `d_k` convolution sums, the dilated-bump growth experiments and the
//! x-modulated lattice symbol whose output is a multiple of a bump.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::{euclid, lp_base, simpson};
use crate::decomp::LPPartition;
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, semilog_fit, LineFit};
use crate::grid::{inverse_transform, Field, Grid, Side};
use crate::mpdo::{evaluate_with, two_pi_periods, EvalOptions, Envelope, LatticeBump, SymbolSpec};
use crate::par;

type C = Complex64;

/// Default truncation of the free summation variables in `d_k`, as a
/// multiple of the output radius.
pub const DK_FREE_FACTOR: usize = 16;
pub const DEFAULT_WAINGER_A: f64 = 0.9;
pub const DEFAULT_WAINGER_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaingerParams {
    pub a: f64,
    pub b: f64,
    /// Damping `e^{-t|k|}`; `t = 0` leaves the truncated sum undamped.
    pub t: f64,
    pub k_max: usize,
}

impl WaingerParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Parameter(format!("a = {} must lie in (0, 1)", self.a)));
        }
        if !(self.b > 0.0 && self.b < n as f64) {
            return Err(Error::Parameter(format!("b = {} must lie in (0, {n})", self.b)));
        }
        if !(self.t >= 0.0) {
            return Err(Error::Parameter("t must be nonnegative".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Parameter("truncation radius must be positive".into()));
        }
        Ok(())
    }
}

/// `b = n - a n/2 - n/q + a n/q + eps`.
pub fn wainger_exponent(n: usize, a: f64, q: f64, eps: f64) -> f64 {
    let n = n as f64;
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    n - a * n / 2.0 - n * iq + a * n * iq + eps
}

/// Lattice points `0 < |k| <= radius` (Euclidean), lexicographic order.
pub fn punctured_ball(n: usize, radius: usize) -> Vec<Vec<i64>> {
    let r = radius as i64;
    let side = (2 * r + 1) as usize;
    let mut out = Vec::new();
    for t in 0..side.pow(n as u32) {
        let mut rem = t;
        let mut k = vec![0i64; n];
        for a in (0..n).rev() {
            k[a] = (rem % side) as i64 - r;
            rem /= side;
        }
        let s: i64 = k.iter().map(|v| v * v).sum();
        if s > 0 && s <= r * r {
            out.push(k);
        }
    }
    out
}

/// `(k, e^{-t|k|} |k|^{-b} e^{i|k|^a})` over the punctured ball.
pub fn wainger_coefficients(prm: &WaingerParams, n: usize) -> Result<Vec<(Vec<i64>, C)>> {
    prm.validate(n)?;
    Ok(punctured_ball(n, prm.k_max)
        .into_iter()
        .map(|k| {
            let r = euclid(&k.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let c = C::from_polar((-prm.t * r).exp() * r.powf(-prm.b), r.powf(prm.a));
            (k, c)
        })
        .collect())
}

/// `sum_{0 < |k| <= K} e^{-t|k|} |k|^{-b} e^{i|k|^a} e^{ik.x} phi(x)`.
pub fn wainger_function(prm: &WaingerParams, envelope: &Field, grid: &Grid) -> Result<Field> {
    if !envelope.grid().same_as(grid) || envelope.side() != Side::Physical {
        return Err(Error::Shape("envelope must be a physical field on the grid".into()));
    }
    let n = grid.dim();
    two_pi_periods(grid)?;
    if prm.k_max as f64 >= grid.max_freq() {
        return Err(Error::Range(format!(
            "truncation radius {} outside the grid frequency range {:.3}",
            prm.k_max,
            grid.max_freq()
        )));
    }
    let coeffs = wainger_coefficients(prm, n)?;
    let mut fh = Field::zeros(*grid, Side::Frequency);
    let scale = grid.period().powi(n as i32);
    let p = grid.period() / (2.0 * PI);
    for (k, c) in &coeffs {
        let idx: Vec<i64> = k.iter().map(|&v| (v as f64 * p).round() as i64).collect();
        let i = grid.index_of_freq(&idx).ok_or_else(|| Error::Range("frequency outside the grid".into()))?;
        fh.values_mut()[i] += c * scale;
    }
    let s = inverse_transform(&fh)?;
    s.mul(envelope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DkParams {
    pub m: f64,
    pub b: Vec<f64>,
    pub k_max: usize,
    pub n: usize,
    /// Bound on `|k_j|_inf` for the summation variables; defaults to
    /// `DK_FREE_FACTOR * k_max`.
    #[serde(default)]
    pub free_radius: Option<usize>,
    #[serde(default = "default_cap")]
    pub cost_cap: f64,
}

fn default_cap() -> f64 {
    crate::mpdo::DEFAULT_COST_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkTable {
    pub n: usize,
    pub k_max: usize,
    pub free_radius: usize,
    /// `(k, d_k)` for `|k|_inf <= k_max`, lexicographic.
    pub entries: Vec<(Vec<i64>, f64)>,
}

/// `d_k = sum_{k_1 + ... + k_N = k, k_j != 0} <(k_1, ..., k_N)>^m prod |k_j|^{-b_j}`.
pub fn compute_dk(p: &DkParams) -> Result<DkTable> {
    let nin = p.b.len();
    if nin == 0 || p.n == 0 || p.n > 2 {
        return Err(Error::Parameter("need N >= 1 exponents and n in {1, 2}".into()));
    }
    let free = p.free_radius.unwrap_or(DK_FREE_FACTOR * p.k_max);
    if free < p.k_max {
        return Err(Error::Parameter("free radius must be at least k_max".into()));
    }
    let n = p.n;
    let kside = 2 * p.k_max + 1;
    let fside = 2 * free + 1;
    let outputs = kside.pow(n as u32);
    let inner = (fside as f64).powi(((nin - 1) * n) as i32);
    let cost = outputs as f64 * inner;
    if cost > p.cost_cap {
        return Err(Error::CostCap { estimate: cost, cap: p.cost_cap });
    }
    let decode = |t: usize, side: usize, r: usize| -> Vec<i64> {
        let mut rem = t;
        let mut v = vec![0i64; n];
        for a in (0..n).rev() {
            v[a] = (rem % side) as i64 - r as i64;
            rem /= side;
        }
        v
    };
    let fr = free as i64;
    let per_free = fside.pow(n as u32);
    let free_count = per_free.pow((nin - 1) as u32);
    let values = par::map_range(outputs, |o| {
        let k = decode(o, kside, p.k_max);
        let mut acc = 0.0;
        let mut ks = vec![0i64; n * nin];
        for t in 0..free_count {
            let mut rem = t;
            for j in (0..nin - 1).rev() {
                let v = decode(rem % per_free, fside, free);
                rem /= per_free;
                ks[j * n..(j + 1) * n].copy_from_slice(&v);
            }
            let mut ok = true;
            for a in 0..n {
                let s: i64 = (0..nin - 1).map(|j| ks[j * n + a]).sum();
                let last = k[a] - s;
                if last.abs() > fr {
                    ok = false;
                }
                ks[(nin - 1) * n + a] = last;
            }
            if !ok {
                continue;
            }
            let mut prod = 1.0;
            let mut sq = 0.0;
            for (j, bj) in p.b.iter().enumerate() {
                let blk = &ks[j * n..(j + 1) * n];
                let s2: i64 = blk.iter().map(|v| v * v).sum();
                if s2 == 0 {
                    prod = 0.0;
                    break;
                }
                sq += s2 as f64;
                prod *= (s2 as f64).powf(-bj / 2.0);
            }
            if prod != 0.0 {
                acc += prod * (1.0 + sq).powf(p.m / 2.0);
            }
        }
        acc
    });
    let entries = (0..outputs).map(|o| (decode(o, kside, p.k_max), values[o])).collect();
    Ok(DkTable { n, k_max: p.k_max, free_radius: free, entries })
}

impl DkTable {
    pub fn get(&self, k: &[i64]) -> Option<f64> {
        self.entries.iter().find(|(kk, _)| kk.as_slice() == k).map(|(_, v)| *v)
    }

    /// Log-log fit of `d_k` against `|k|` over `k_max/4 <= |k| <= k_max`.
    pub fn slope(&self) -> Option<LineFit> {
        let lo = self.k_max as f64 / 4.0;
        let hi = self.k_max as f64;
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .entries
            .iter()
            .filter_map(|(k, d)| {
                let r = euclid(&k.iter().map(|&v| v as f64).collect::<Vec<_>>());
                (r >= lo && r <= hi).then_some((r, *d))
            })
            .unzip();
        loglog_fit(&xs, &ys)
    }
}

/// `m - sum b_j + (N - 1) n`.
pub fn dk_predicted_slope(m: f64, b: &[f64], n: usize) -> f64 {
    m - b.iter().sum::<f64>() + ((b.len() - 1) * n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotFamily {
    #[serde(alias = "single-slot")]
    SingleSlot,
    #[serde(alias = "all-slots")]
    AllSlots,
}

/// LP annulus function `psi(y) = phi(y) - phi(2y)`, radial.
fn psi_r(r: f64) -> f64 {
    LPPartition::psi(1, 2.0 * r)
}

/// `varphi(y) = psi_0(2y)`, supported in the unit ball.
fn varphi_r(r: f64) -> f64 {
    lp_base(2.0 * r)
}

/// `int_{R^n} g(|y|)^2 dy` for radial `g` supported in `|y| <= outer`.
fn radial_l2sq(n: usize, outer: f64, g: impl Fn(f64) -> f64) -> f64 {
    let nodes = 4000;
    match n {
        1 => 2.0 * simpson(|r| g(r).powi(2), 0.0, outer, nodes),
        _ => 2.0 * PI * simpson(|r| r * g(r).powi(2), 0.0, outer, nodes),
    }
}

fn bessel_j0(z: f64) -> f64 {
    let nodes = (4.0 * z.abs()).ceil().max(64.0) as usize * 2;
    simpson(|t| (z * t.sin()).cos(), 0.0, PI, nodes) / PI
}

/// `F^{-1} g(xi) = (2 pi)^{-n} int g(|y|) e^{i y.xi} dy` for radial `g`
/// supported in `|y| <= outer`, evaluated at `|xi| = rho`.
fn radial_inverse_transform(n: usize, outer: f64, rho: f64, g: &impl Fn(f64) -> f64) -> f64 {
    let nodes = ((outer * rho.max(1.0)) * 16.0).ceil().max(2000.0) as usize * 2;
    match n {
        1 => simpson(|r| g(r) * (r * rho).cos(), 0.0, outer, nodes) / PI,
        _ => simpson(|r| r * g(r) * bessel_j0(r * rho), 0.0, outer, nodes.min(8000)) / (2.0 * PI),
    }
}

fn radial_table(grid: &Grid, outer: f64, g: impl Fn(f64) -> f64 + Sync) -> Vec<C> {
    let n = grid.dim();
    // cache by squared frequency index
    let kidx: Vec<i64> = (0..grid.len())
        .map(|i| grid.freq_indices_at(i)[..n].iter().map(|v| v * v).sum())
        .collect();
    let mut keys = kidx.clone();
    keys.sort_unstable();
    keys.dedup();
    let dw = grid.freq_spacing();
    let vals = par::map_slice(&keys, |&s2| radial_inverse_transform(n, outer, (s2 as f64).sqrt() * dw, &g));
    kidx.iter().map(|s2| C::new(vals[keys.binary_search(s2).unwrap()], 0.0)).collect()
}

fn check_slot_grid(grid: &Grid, a: u32) -> Result<()> {
    let reach = 2f64.powi(a as i32 + 2);
    if reach > grid.period() / 2.0 {
        return Err(Error::Bandwidth(format!(
            "a = {a}: support radius {reach} of psi_a * psi_a exceeds half the period {}",
            grid.period() / 2.0
        )));
    }
    Ok(())
}

/// Frequency tables of the slot factors `F^{-1} psi_a` and `F^{-1} varphi`.
pub fn slot_multipliers(grid: &Grid, family: SlotFamily, a: u32, inputs: usize) -> Result<Vec<Vec<C>>> {
    check_slot_grid(grid, a)?;
    let sa = 2f64.powi(a as i32);
    let psi_tab = radial_table(grid, 2.0 * sa, |r| psi_r(r / sa));
    let var_tab = if family == SlotFamily::SingleSlot && inputs > 1 {
        Some(radial_table(grid, 1.0, varphi_r))
    } else {
        None
    };
    Ok((0..inputs)
        .map(|j| match (family, j) {
            (SlotFamily::AllSlots, _) | (SlotFamily::SingleSlot, 0) => psi_tab.clone(),
            _ => var_tab.clone().expect("built for single slot"),
        })
        .collect())
}

/// Test tuple `f_1 = psi_a` and `f_j = varphi` (single slot) or all `psi_a`.
pub fn slot_inputs(grid: &Grid, family: SlotFamily, a: u32, inputs: usize) -> Result<Vec<Field>> {
    check_slot_grid(grid, a)?;
    let sa = 2f64.powi(a as i32);
    let psi = Field::from_real_fn(*grid, Side::Physical, |x| psi_r(euclid(x) / sa));
    let var = Field::from_real_fn(*grid, Side::Physical, |x| varphi_r(euclid(x)));
    Ok((0..inputs)
        .map(|j| match (family, j) {
            (SlotFamily::AllSlots, _) | (SlotFamily::SingleSlot, 0) => psi.clone(),
            _ => var.clone(),
        })
        .collect())
}

/// `(varphi * varphi)(x)` along the first axis.
fn varphi_autocorrelation(n: usize, x: f64) -> f64 {
    match n {
        1 => simpson(|y| varphi_r(y.abs()) * varphi_r((x - y).abs()), -1.0, 1.0, 2000),
        _ => simpson(
            |y1| simpson(|y2| varphi_r(y1.hypot(y2)) * varphi_r((x - y1).hypot(y2)), -1.0, 1.0, 400),
            -1.0,
            1.0,
            400,
        ),
    }
}

/// Largest radius with `(varphi * varphi)(x) >= (varphi * varphi)(0) / 2`.
pub fn calibrated_delta(n: usize) -> f64 {
    let half = 0.5 * varphi_autocorrelation(n, 0.0);
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if varphi_autocorrelation(n, mid) >= half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `(2 pi)^{-Nn} 2^{an} ||psi||_2^2 ||varphi||_2^{2(N-1)}`: the output at
/// the origin for the single-slot tuple.
pub fn single_slot_origin_value(n: usize, a: u32, inputs: usize) -> f64 {
    let psi2 = radial_l2sq(n, 2.0, psi_r);
    let var2 = radial_l2sq(n, 1.0, varphi_r);
    (2.0 * PI).powi(-((inputs * n) as i32)) * 2f64.powi((a as usize * n) as i32) * psi2 * var2.powi(inputs as i32 - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub family: SlotFamily,
    pub a_values: Vec<u32>,
    pub inputs: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub a: u32,
    pub norm: f64,
    pub origin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub family: SlotFamily,
    pub rows: Vec<GrowthRow>,
    /// Fit of `log2 norm` against `a`.
    pub fit: LineFit,
    pub expected_slope: f64,
    pub delta: f64,
}

fn lr_norm(values: &[C], weight: f64, r: f64, mask: impl Fn(usize) -> bool) -> f64 {
    if r.is_infinite() {
        return values.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    }
    let s: f64 = values.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, v)| v.norm().powf(r)).sum();
    (s * weight).powf(1.0 / r)
}

/// Run the dilated-bump tuples for every `a` and fit the growth of
/// `||T||_{L^r(|x| <= delta)}` (single slot) or `||T||_{L^r}` (all slots).
pub fn prop74_growth_experiment(grid: &Grid, p: &GrowthParams) -> Result<GrowthReport> {
    if p.inputs == 0 || p.a_values.len() < 2 {
        return Err(Error::Parameter("need N >= 1 and at least two values of a".into()));
    }
    if !(p.r > 0.0) {
        return Err(Error::Parameter("r must be positive".into()));
    }
    for &a in &p.a_values {
        check_slot_grid(grid, a)?;
    }
    let n = grid.dim();
    let delta = calibrated_delta(n);
    let origin = grid.index_of_freq(&[0, 0][..n]).expect("origin is a grid point");
    let h = grid.spacing().powi(n as i32);
    let rows = p
        .a_values
        .iter()
        .map(|&a| {
            let spec = SymbolSpec::Sharpness { family: p.family, a };
            let fs = slot_inputs(grid, p.family, a, p.inputs)?;
            let t = evaluate_with(&spec, &fs, EvalOptions::default())?;
            let norm = match p.family {
                SlotFamily::SingleSlot => lr_norm(t.values(), h, p.r, |i| euclid(&grid.point_at(i)[..n]) <= delta),
                SlotFamily::AllSlots => lr_norm(t.values(), h, p.r, |_| true),
            };
            Ok(GrowthRow { a, norm, origin: t.values()[origin].re })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.a as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let fit = semilog_fit(&xs, &ys).ok_or_else(|| Error::Construction("growth norms must be positive".into()))?;
    let nf = n as f64;
    let ir = if p.r.is_infinite() { 0.0 } else { 1.0 / p.r };
    let expected_slope = match p.family {
        SlotFamily::SingleSlot => nf,
        SlotFamily::AllSlots => p.inputs as f64 * nf + nf * ir,
    };
    Ok(GrowthReport { family: p.family, rows, fit, expected_slope, delta })
}

/// Exponent of the symbol-norm times input-norm budget:
/// `a (s_1 + n/2 + n/q_1)` or `a (sum (s_j + n/2) + sum n/q_j)`.
/// `s` and `q` index the inputs `1..=N`.
pub fn prop74_budget(a: f64, family: SlotFamily, n: usize, s: &[f64], q: &[f64]) -> Result<f64> {
    if s.is_empty() || s.len() != q.len() {
        return Err(Error::Shape("need matching nonempty s and q".into()));
    }
    let nf = n as f64;
    let iq = |v: f64| if v.is_infinite() { 0.0 } else { nf / v };
    Ok(match family {
        SlotFamily::SingleSlot => a * (s[0] + nf / 2.0 + iq(q[0])),
        SlotFamily::AllSlots => a * s.iter().zip(q).map(|(sj, qj)| sj + nf / 2.0 + iq(*qj)).sum::<f64>(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop73Params {
    pub m: f64,
    pub s0: f64,
    /// Wainger phase exponents `a_j` in `(0, 1)`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub k_max: usize,
}

/// `sum over 0 < |l_j| <= K of <(l_1, ..., l_N)>^{m - s_0} prod |l_j|^{-b_j}`.
pub fn prop73_coefficient_sum(m: f64, s0: f64, b: &[f64], k_max: usize, n: usize) -> f64 {
    let pts = punctured_ball(n, k_max);
    let norms: Vec<f64> = pts.iter().map(|k| k.iter().map(|v| (v * v) as f64).sum()).collect();
    let nin = b.len();
    let total = pts.len().pow(nin as u32);
    let rows = par::map_range(pts.len(), |first| {
        let mut acc = 0.0;
        let per = total / pts.len();
        for t in 0..per {
            let mut rem = t;
            let mut sq = norms[first];
            let mut prod = norms[first].powf(-b[0] / 2.0);
            for j in (1..nin).rev() {
                let i = rem % pts.len();
                rem /= pts.len();
                sq += norms[i];
                prod *= norms[i].powf(-b[j] / 2.0);
            }
            acc += prod * (1.0 + sq).powf((m - s0) / 2.0);
        }
        acc
    });
    rows.iter().sum()
}

/// `m - s_0 - b_1 + sum_{j >= 2} (n - b_j) + n`.
pub fn prop73_growth_exponent(m: f64, s0: f64, b: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    m - s0 - b[0] + b[1..].iter().map(|bj| nf - bj).sum::<f64>() + nf
}

/// Symbol `phi(x) e^{-ix.(xi_1+...+xi_N)} sum <l>^{m-s_0} prod e^{-i|l_j|^{a_j}} phi(xi_j - l_j)`
/// truncated to `|l_j|_inf <= K`, and the Wainger tuple with envelope
/// `F^{-1} phi`.
pub fn prop73_symbol(p: &Prop73Params, grid: &Grid) -> Result<(SymbolSpec, Vec<Field>)> {
    let n = grid.dim();
    let nin = p.a.len();
    if nin == 0 || p.b.len() != nin {
        return Err(Error::Shape("need matching nonempty a and b".into()));
    }
    two_pi_periods(grid)?;
    if p.k_max as f64 + 0.5 > grid.max_freq() {
        return Err(Error::Bandwidth(format!(
            "truncation {} exceeds the grid frequency range {:.3}",
            p.k_max,
            grid.max_freq()
        )));
    }
    let seq_pts = crate::weights::LatticeSeq::points_per_block(n, p.k_max);
    let total = seq_pts.pow(nin as u32);
    let r = p.k_max as i64;
    let side = 2 * p.k_max + 1;
    let coeffs: Vec<[f64; 2]> = (0..total)
        .map(|t| {
            let mut rem = t;
            let mut l = vec![0i64; n * nin];
            for v in l.iter_mut().rev() {
                *v = (rem % side) as i64 - r;
                rem /= side;
            }
            let sq: f64 = l.iter().map(|v| (v * v) as f64).sum();
            let mut phase = 0.0;
            for (j, blk) in l.chunks(n).enumerate() {
                let nr = euclid(&blk.iter().map(|&v| v as f64).collect::<Vec<_>>());
                phase -= nr.powf(p.a[j]);
            }
            let c = C::from_polar((1.0 + sq).powf((p.m - p.s0) / 2.0), phase);
            [c.re, c.im]
        })
        .collect();
    let spec = SymbolSpec::XModulated {
        envelope: Envelope::Half,
        inner: Box::new(SymbolSpec::Lattice { radius: p.k_max, coeffs, bump: LatticeBump::Half }),
    };
    let envelope = inverse_transform(&Field::from_real_fn(*grid, Side::Frequency, |xi| LatticeBump::Half.eval(xi)))?;
    let fs = (0..nin)
        .map(|j| {
            let prm = WaingerParams { a: p.a[j], b: p.b[j], t: 0.0, k_max: p.k_max };
            wainger_function(&prm, &envelope, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, fs))
}

/// Predicted output `L^{-Nn} (sum_k phi(xi_k)^2)^N S phi(x)` on the grid,
/// with `S` the truncated coefficient sum.
pub fn prop73_prediction(p: &Prop73Params, grid: &Grid) -> Result<Field> {
    let n = grid.dim();
    let nin = p.b.len();
    let s = prop73_coefficient_sum(p.m, p.s0, &p.b, p.k_max, n);
    let bump_sq: f64 = (0..grid.len()).map(|i| LatticeBump::Half.eval(&grid.freq_at(i)[..n]).powi(2)).sum();
    let c = grid.period().powi(-((nin * n) as i32)) * bump_sq.powi(nin as i32) * s;
    Ok(Field::from_real_fn(*grid, Side::Physical, |x| c * LatticeBump::Half.eval(x)))
}
