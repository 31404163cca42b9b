//! Command dispatch.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use mpdo_core::decomp::{LPPartition, UniformPair};
use mpdo_core::grid::{field_to_bytes, inverse_transform, lebesgue_norm, read_field};
use mpdo_core::mpdo::{
    cost_estimate, empirical_bound, evaluate_prepared, trial_rng, BoundSpec, Exponents, LatticeBump, PreparedSymbol,
    SymbolSpec,
};
use mpdo_core::norms::{
    amalgam_norm_cells, bmo_discrete_norm, l2ul_norm, sqrt_s_square_norm, AmalgamParams, KernelParams,
};
use mpdo_core::sharpness::{
    compute_dk, dk_predicted_slope, prop73_coefficient_sum, prop73_growth_exponent, prop74_growth_experiment,
    wainger_function, GrowthParams, WaingerParams,
};
use mpdo_core::weights::{bn_constant_estimate, OnLattice, WeightSpec};
use mpdo_core::{Complex64, Field, Grid, Side};
use serde_json::Value;

use crate::config::{Command, FunctionSpec, NormSpec, RunConfig, SharpnessConfig};
use crate::error::CliError;
use crate::record::{num, sha256_hex, FitScale, ResultRecord, Table, TableFit};

/// Files besides `result.json` produced by a run, as `(name, bytes)`.
pub type Artifacts = Vec<(String, Vec<u8>)>;

/// Run a materialized config without touching the file system (except to
/// read input files).
pub fn execute(cfg: &RunConfig) -> Result<(ResultRecord, Artifacts), CliError> {
    let start = Instant::now();
    let cmd = cfg.command();
    let echo = serde_json::to_value(cfg).map_err(|e| CliError::Schema(e.to_string()))?;
    let mut rec = ResultRecord::new(cmd.name(), echo);
    let mut arts = Artifacts::new();
    match cmd {
        Command::Eval => eval(cfg, &mut rec, &mut arts)?,
        Command::Norm => norm(cfg, &mut rec)?,
        Command::WeightTest => weight_test(cfg, &mut rec)?,
        Command::DecompCheck => decomp_check(cfg, &mut rec)?,
        Command::BoundExperiment => bound_experiment(cfg, &mut rec)?,
        Command::SharpnessExperiment => sharpness(cfg, &mut rec)?,
        Command::Dk => dk(cfg, &mut rec)?,
    }
    for (name, bytes) in &arts {
        rec.artifacts.insert(name.clone(), sha256_hex(bytes));
    }
    rec.wall_time_s = start.elapsed().as_secs_f64();
    Ok((rec, arts))
}

/// Run and write every output file into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<ResultRecord, CliError> {
    let (rec, arts) = execute(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    for (name, bytes) in &arts {
        let p = out.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    rec.write(out)?;
    Ok(rec)
}

/// [`run`] inside a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &RunConfig, out: &Path, threads: usize) -> Result<ResultRecord, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
    pool.install(|| run(cfg, out))
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    cfg.grid.as_ref().ok_or_else(|| CliError::Schema("'grid' is required".into()))?.build()
}

fn weight(cfg: &RunConfig) -> Result<WeightSpec, CliError> {
    let id = cfg.weight.as_deref().unwrap_or("const");
    WeightSpec::from_id(id, cfg.base_dir.as_deref()).map_err(|e| match e {
        mpdo_core::Error::Io(io) => CliError::Io(format!("weight '{id}': {io}")),
        other => CliError::Schema(format!("weight: {other}")),
    })
}

/// Build the input functions on `g`.
pub fn build_functions(cfg: &RunConfig, g: &Grid) -> Result<Vec<Field>, CliError> {
    let n = g.dim();
    cfg.functions
        .iter()
        .enumerate()
        .map(|(i, spec)| match spec {
            FunctionSpec::File { path } => {
                let p = cfg.resolve(path);
                let f = read_field(&p).map_err(|e| match e {
                    mpdo_core::Error::Io(io) => CliError::Io(format!("{}: {io}", p.display())),
                    other => CliError::Schema(format!("{}: {other}", p.display())),
                })?;
                if !f.grid().same_as(g) || f.side() != Side::Physical {
                    return Err(CliError::Schema(format!("functions[{i}]: field file is not a physical field on the grid")));
                }
                Ok(f)
            }
            FunctionSpec::Gaussian { center, width, frequency } => {
                let c = padded(center, n, i, "center")?;
                let w = padded(frequency, n, i, "frequency")?;
                if !(*width > 0.0) {
                    return Err(CliError::Schema(format!("functions[{i}].width must be positive")));
                }
                Ok(Field::from_fn(*g, Side::Physical, |x| {
                    let mut r2 = 0.0;
                    let mut ph = 0.0;
                    for a in 0..n {
                        r2 += (x[a] - c[a]).powi(2);
                        ph += w[a] * x[a];
                    }
                    Complex64::from_polar((-0.5 * r2 / (width * width)).exp(), ph)
                }))
            }
            FunctionSpec::Random { family } => {
                let fam = family.clone().unwrap_or_else(|| mpdo_core::mpdo::FamilySpec::default_for(g));
                let mut rng = trial_rng(cfg.seed(), i as u64);
                Ok(fam.sample(g, &mut rng)?)
            }
        })
        .collect()
}

fn padded(v: &[f64], n: usize, i: usize, key: &str) -> Result<Vec<f64>, CliError> {
    match v.len() {
        0 => Ok(vec![0.0; n]),
        l if l == n => Ok(v.to_vec()),
        l => Err(CliError::Schema(format!("functions[{i}].{key} has {l} entries, grid dimension is {n}"))),
    }
}

fn eval(cfg: &RunConfig, rec: &mut ResultRecord, arts: &mut Artifacts) -> Result<(), CliError> {
    let g = grid(cfg)?;
    let fs = build_functions(cfg, &g)?;
    let spec = cfg.symbol.as_ref().ok_or_else(|| CliError::Schema("'symbol' is required".into()))?;
    let opts = cfg.eval.unwrap_or_default().options();
    let sym = PreparedSymbol::new(spec, &g, fs.len())?;
    let out = evaluate_prepared(&sym, &fs, opts)?;
    rec.scalar("inputs", fs.len() as f64);
    rec.scalar("cost_estimate", cost_estimate(&sym, opts.path));
    rec.scalar("max_abs", out.max_abs());
    rec.scalar("l2_norm", lebesgue_norm(&out, 2.0)?);
    let name = cfg.output.clone().unwrap_or_default().field;
    if name.contains('/') || name.contains('\\') || name.is_empty() || name == "result.json" {
        return Err(CliError::Schema(format!("output.field '{name}' must be a plain file name")));
    }
    arts.push((name, field_to_bytes(&out)));
    Ok(())
}

fn norm(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let g = grid(cfg)?;
    let fs = build_functions(cfg, &g)?;
    let spec = cfg.norm.as_ref().ok_or_else(|| CliError::Schema("'norm' is required".into()))?;
    let mut t = Table::new(&["function", "norm"]);
    for (i, f) in fs.iter().enumerate() {
        let v = match spec {
            NormSpec::Lebesgue { p } => lebesgue_norm(f, p.0)?,
            NormSpec::Amalgam { p, q, cell } => amalgam_norm_cells(f, AmalgamParams::new(p.0, q.0), *cell)?,
            NormSpec::L2ul => l2ul_norm(f)?,
            NormSpec::SSquare { p, decay } => {
                let k = decay.map_or_else(|| KernelParams::default_for(g.dim()), |decay| KernelParams { decay });
                sqrt_s_square_norm(f, p.0, k)?
            }
            NormSpec::Bmo => bmo_discrete_norm(f)?,
        };
        rec.scalar(&format!("norm_{i}"), v);
        t.push(vec![num(i as f64), num(v)]);
    }
    rec.table = Some(t);
    Ok(())
}

fn weight_test(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let w = weight(cfg)?;
    let p = cfg.weight_test.clone().unwrap_or_default();
    if p.radii.is_empty() {
        return Err(CliError::Schema("weight_test.radii must be non-empty".into()));
    }
    let on = OnLattice { weight: &w, dim: p.dim };
    let mut t = Table::new(&["M", "estimate", "iterations", "converged", "diverged"]);
    for &m in &p.radii {
        let e = bn_constant_estimate(&on, p.dim, p.blocks, m, p.method)?;
        t.push(vec![num(m as f64), num(e.value), num(e.iterations as f64), Value::Bool(e.converged), Value::Bool(e.diverged)]);
        rec.scalar(&format!("estimate_M{m}"), e.value);
    }
    if p.radii.len() >= 2 {
        if let Some(f) = t.fit("M", "estimate", FitScale::LogLog) {
            rec.scalar("slope", f.slope);
        }
    }
    rec.table = Some(t);
    Ok(())
}

fn decomp_check(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let g = grid(cfg)?;
    let n = g.dim();
    let lp = LPPartition::new(&g)?;
    rec.scalar("lp_k_max", lp.k_max() as f64);
    rec.scalar("lp_grid_residual", lp.grid_residual());
    // off-grid frequencies on a fixed irrational stride
    let top = g.max_freq();
    let off: Vec<Vec<f64>> = (0..997)
        .map(|i| (0..n).map(|a| ((i as f64 * (0.618_033_988_749_895 + 0.1 * a as f64)).fract() * 2.0 - 1.0) * top).collect())
        .collect();
    rec.scalar("lp_offgrid_residual", lp.residual_at(&off));
    let pair = UniformPair::new(&g)?;
    let pts: Vec<Vec<f64>> = (0..g.len()).map(|i| g.point_at(i)[..n].to_vec()).collect();
    rec.scalar("pair_residual", pair.partition_residual(&pts));
    rec.scalar("pair_chi_leakage", pair.chi_leakage()?);
    rec.scalar("pair_kappa_leakage", pair.kappa_support_leakage());
    rec.scalar("pair_chi_lower", pair.c_lower());
    rec.scalar("pair_chi_width", pair.width());
    Ok(())
}

fn scaled_symbol(spec: &SymbolSpec, s: f64) -> Result<SymbolSpec, CliError> {
    match spec {
        SymbolSpec::BandLimited { radii, terms, seed } => Ok(SymbolSpec::BandLimited {
            radii: radii.iter().map(|r| r * s).collect(),
            terms: *terms,
            seed: *seed,
        }),
        _ if s == 1.0 => Ok(spec.clone()),
        _ => Err(CliError::Schema("bound.scales other than 1 need a band-limited symbol".into())),
    }
}

fn bound_experiment(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let g = grid(cfg)?;
    let spec = cfg.symbol.as_ref().ok_or_else(|| CliError::Schema("'symbol' is required".into()))?;
    let e = cfg.exponents.as_ref().ok_or_else(|| CliError::Schema("'exponents' is required".into()))?;
    let b = cfg.bound.clone().unwrap_or_default();
    let fam = b.family.clone().unwrap_or_else(|| mpdo_core::mpdo::FamilySpec::default_for(&g));
    let exps = Exponents { q: e.q(), r: e.r.0 };
    let bspec = match (&b.grid_x, &b.grid_xi) {
        (Some(x), Some(xi)) => Some(BoundSpec { weight: weight(cfg)?, grid_x: x.build()?, grid_xi: xi.build()? }),
        _ => None,
    };
    let opts = cfg.eval.unwrap_or_default().options();
    let nf = g.dim() as f64;
    let exponent = nf / 2.0 + exps.q.iter().map(|q| nf / q.min(2.0)).sum::<f64>();
    rec.scalar("bound_exponent", exponent);
    let mut t = Table::new(&["scale", "sup", "bound", "constant", "skipped"]);
    let mut constants = Vec::new();
    for &s in &b.scales {
        let sp = scaled_symbol(spec, s)?;
        let r = empirical_bound(&sp, &g, &exps, &fam, b.trials, cfg.seed(), opts, bspec.as_ref())?;
        let c = r.bound.map(|bd| r.sup / bd);
        if let Some(c) = c {
            constants.push(c);
        }
        t.push(vec![
            num(s),
            num(r.sup),
            r.bound.map_or(Value::Null, num),
            c.map_or(Value::Null, num),
            num(r.skipped as f64),
        ]);
    }
    let sups: Vec<f64> = t.rows.iter().map(|r| r[1].as_f64().unwrap_or(0.0)).collect();
    rec.scalar("sup_max", sups.iter().cloned().fold(0.0, f64::max));
    if let Some(c0) = constants.first() {
        rec.scalar("constant_first", *c0);
        rec.scalar("constant_max", constants.iter().cloned().fold(0.0, f64::max));
    }
    if b.scales.len() >= 2 {
        if let Some(f) = t.fit("scale", "sup", FitScale::LogLog) {
            rec.scalar("sup_slope", f.slope);
        }
    }
    rec.table = Some(t);
    Ok(())
}

fn sharpness(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let s = cfg.sharpness.as_ref().ok_or_else(|| CliError::Schema("'sharpness' is required".into()))?;
    match s {
        SharpnessConfig::Growth { family, a_values, inputs, r } => {
            let g = grid(cfg)?;
            let p = GrowthParams { family: *family, a_values: a_values.clone(), inputs: *inputs, r: r.0 };
            let rep = prop74_growth_experiment(&g, &p)?;
            let mut t = Table::new(&["a", "norm", "origin"]);
            for row in &rep.rows {
                t.push(vec![num(row.a as f64), num(row.norm), num(row.origin)]);
            }
            t.fit = Some(TableFit {
                x: "a".into(),
                y: "norm".into(),
                scale: FitScale::SemiLog,
                slope: rep.fit.slope,
                intercept: rep.fit.intercept,
                residual: rep.fit.residual,
            });
            rec.scalar("slope", rep.fit.slope);
            rec.scalar("expected_slope", rep.expected_slope);
            rec.scalar("delta", rep.delta);
            rec.table = Some(t);
        }
        SharpnessConfig::CoefficientSums { m, s0, b, k_values, n } => {
            if k_values.is_empty() {
                return Err(CliError::Schema("sharpness.k_values must be non-empty".into()));
            }
            let mut t = Table::new(&["K", "sum"]);
            for &k in k_values {
                t.push(vec![num(k as f64), num(prop73_coefficient_sum(*m, *s0, b, k, *n))]);
            }
            if k_values.len() >= 2 {
                if let Some(f) = t.fit("K", "sum", FitScale::LogLog) {
                    rec.scalar("slope", f.slope);
                }
            }
            rec.scalar("growth_exponent", prop73_growth_exponent(*m, *s0, b, *n));
            rec.table = Some(t);
        }
        SharpnessConfig::Wainger { a, b, t_values, k_max } => {
            let g = grid(cfg)?;
            let envelope =
                inverse_transform(&Field::from_real_fn(g, Side::Frequency, |xi| LatticeBump::Half.eval(xi)))?;
            let mut t = Table::new(&["t", "l2_norm"]);
            for &tv in t_values {
                let prm = WaingerParams { a: *a, b: *b, t: tv, k_max: *k_max };
                prm.validate(g.dim())?;
                let f = wainger_function(&prm, &envelope, &g)?;
                t.push(vec![num(tv), num(lebesgue_norm(&f, 2.0)?)]);
            }
            rec.scalar("two_pi_periods", g.period() / (2.0 * PI));
            rec.table = Some(t);
        }
    }
    Ok(())
}

fn dk(cfg: &RunConfig, rec: &mut ResultRecord) -> Result<(), CliError> {
    let p = cfg.dk.as_ref().ok_or_else(|| CliError::Schema("'dk' is required".into()))?;
    let table = compute_dk(p)?;
    let mut t = Table::new(&["k", "k_norm", "d_k"]);
    for (k, d) in &table.entries {
        let label = k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let r = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        t.push(vec![Value::String(label), num(r), num(*d)]);
    }
    if let Some(f) = table.slope() {
        t.fit = Some(TableFit {
            x: "k_norm".into(),
            y: "d_k".into(),
            scale: FitScale::LogLog,
            slope: f.slope,
            intercept: f.intercept,
            residual: f.residual,
        });
        rec.scalar("slope", f.slope);
    }
    rec.scalar("predicted_slope", dk_predicted_slope(p.m, &p.b, p.n));
    rec.scalar("free_radius", table.free_radius as f64);
    rec.table = Some(t);
    Ok(())
}
