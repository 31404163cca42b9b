//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use mpdo_core::bump::japanese;
use mpdo_core::decomp::{LPPartition, UniformPair};
use mpdo_core::fit::loglog_fit;
use mpdo_core::mpdo::*;
use mpdo_core::norms::{amalgam_norm, equivalent_amalgam_check, local_norms, sqrt_s_square_norm, AmalgamParams, KernelParams};
use mpdo_core::sharpness::*;
use mpdo_core::weights::{bn_constant_estimate, LatticeSeq, Method, OnLattice, WeightSpec};
use mpdo_core::{Field, Grid, Side};
use mpdo_lab::{parse_config_str, run_with_threads};
use rand::Rng;

type Outcome = (bool, String);

fn random_profile(rng: &mut impl Rng) -> Profile {
    match rng.random_range(0..4) {
        0 => Profile::Gaussian { width: rng.random_range(0.5..4.0), center: vec![rng.random_range(-2.0..2.0)] },
        1 => Profile::Bracket { exponent: rng.random_range(-1.0..1.0) },
        2 => Profile::Bump { radius: rng.random_range(1.0..6.0) },
        _ => Profile::Product {
            factors: vec![
                Profile::Modulation { shift: vec![rng.random_range(-3.0..3.0)] },
                Profile::Scale { re: rng.random_range(-1.0..1.0), im: rng.random_range(-1.0..1.0) },
            ],
        },
    }
}

fn identity_symbol() -> Outcome {
    let start = Instant::now();
    let g = Grid::new(1, 8.0, 64).unwrap();
    let fam = FamilySpec::default_for(&g);
    let spec = SymbolSpec::Constant { c: 1.0, c_im: 0.0 };
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let mut rng = trial_rng(101, t);
        let fs: Vec<Field> = (0..2).map(|_| fam.sample(&g, &mut rng).unwrap()).collect();
        let out = evaluate(&spec, &fs).unwrap();
        let prod = fs[0].mul(&fs[1]).unwrap();
        worst = worst.max(out.rel_max_error(&prod).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    (worst < 1e-10 && secs < 5.0, format!("identity symbol, 20 tuples: max rel error {worst:.2e} (< 1e-10), {secs:.2} s (< 5 s)"))
}

fn separable_oracle() -> Outcome {
    let start = Instant::now();
    let g = Grid::new(1, 8.0, 32).unwrap();
    let fam = FamilySpec::default_for(&g);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let mut rng = trial_rng(202, t);
        let spec = SymbolSpec::Separable { profiles: (0..2).map(|_| random_profile(&mut rng)).collect() };
        let fs: Vec<Field> = (0..2).map(|_| fam.sample(&g, &mut rng).unwrap()).collect();
        let direct = evaluate(&spec, &fs).unwrap();
        let fast = evaluate_separable_fast(&spec, &fs).unwrap();
        worst = worst.max(direct.rel_max_error(&fast).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    (worst < 1e-9 && secs < 30.0, format!("separable symbols vs product-of-multipliers oracle, 20 symbols: max rel error {worst:.2e} (< 1e-9), {secs:.2} s (< 30 s)"))
}

fn partition_residuals() -> Outcome {
    let g = Grid::new(1, 32.0, 256).unwrap();
    let lp = LPPartition::new(&g).unwrap();
    let mut rng = trial_rng(303, 0);
    let top = g.max_freq();
    let off: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random_range(-top..top)]).collect();
    let lp_res = lp.grid_residual().max(lp.residual_at(&off));
    let pair = UniformPair::new(&g).unwrap();
    let mut pts: Vec<Vec<f64>> = (0..g.len()).map(|i| vec![g.point(i)]).collect();
    pts.extend((0..2000).map(|_| vec![rng.random_range(-16.0..16.0)]));
    let pair_res = pair.partition_residual(&pts);
    let chi = pair.chi_leakage().unwrap();
    let kappa = pair.kappa_support_leakage();
    let ok = lp_res < 1e-8 && pair_res < 1e-8 && chi < 1e-8 && kappa < 1e-8;
    (
        ok,
        format!(
            "partition residuals (n=1, M=256): LP {lp_res:.2e}, pair {pair_res:.2e}, chi-hat leakage {chi:.2e}, kappa support leakage {kappa:.2e} (all < 1e-8)"
        ),
    )
}

fn weight_dichotomy() -> Outcome {
    let start = Instant::now();
    let ms = [4usize, 8, 16, 32];
    let constant = WeightSpec::constant();
    let example = WeightSpec::Power { m: -0.5 };
    let est = |w: &WeightSpec, m: usize| {
        bn_constant_estimate(&OnLattice { weight: w, dim: 1 }, 1, 2, m, Method::Alternating).unwrap().value
    };
    let cv: Vec<f64> = ms.iter().map(|&m| est(&constant, m)).collect();
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let slope = loglog_fit(&xs, &cv).unwrap().slope;
    let e16 = est(&example, 16);
    let e32 = est(&example, 32);
    let change = (e32 - e16).abs() / e16;
    let secs = start.elapsed().as_secs_f64();
    let ok = (slope - 0.5).abs() <= 0.15 && change < 0.05 && secs < 120.0;
    (
        ok,
        format!(
            "weight dichotomy: constant-weight slope {slope:.3} (0.5 +- 0.15), (1+|nu_1|+|nu_2|)^-1/2 weight {e16:.4} -> {e32:.4} for M=16->32, change {:.2}% (< 5%), {secs:.1} s",
            100.0 * change
        ),
    )
}

fn single_block_exactness() -> Outcome {
    let one = WeightSpec::constant();
    let mut worst: f64 = 0.0;
    for m in [1usize, 2, 4, 8, 16, 32] {
        let e = bn_constant_estimate(&OnLattice { weight: &one, dim: 1 }, 1, 1, m, Method::Alternating).unwrap();
        worst = worst.max((e.value - 1.0).abs());
    }
    (worst <= 1e-9, format!("N=1 constant weight: max |estimate - 1| = {worst:.2e} over M in 1..32 (<= 1e-9)"))
}

fn bound_scaling() -> Outcome {
    // The bound exponent n/2 + sum n/min(2, q_j) = 1.5 for n = 1, q = (2, 2).
    let per_doubling = 2f64.powf(1.5) * 1.2;
    let cfg = r#"{"command":"bound-experiment","grid":{"n":1,"L":16,"M":128},
        "symbol":{"id":"band-limited","radii":[1,1,1],"terms":8,"seed":3},
        "weight":"power:-0.5","exponents":{"q":[2,2],"r":1},"seed":7,
        "bound":{"trials":20,"scales":[1,2,4,8],"grid_x":{"n":1,"L":8,"M":32},"grid_xi":{"n":1,"L":16,"M":64}}}"#;
    let cfg = parse_config_str(cfg).unwrap().materialize(None, None).unwrap();
    let (rec, _) = mpdo_lab::execute(&cfg).unwrap();
    let t = rec.table.unwrap();
    let sups: Vec<f64> = t.rows.iter().map(|r| r[1].as_f64().unwrap()).collect();
    let consts: Vec<f64> = t.rows.iter().map(|r| r[3].as_f64().unwrap()).collect();
    let growth: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).collect();
    let recorded = 1.3 * consts[0];
    let ok = growth.iter().all(|&g| g <= per_doubling) && consts.iter().all(|&c| c <= recorded);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    (
        ok,
        format!(
            "bound scaling over 3 radius doublings: sup growth per doubling [{}] (<= {per_doubling:.3}); sup/bound constants [{}] (<= recorded {recorded:.3})",
            fmt(&growth),
            fmt(&consts)
        ),
    )
}

fn dk_asymptotics() -> Outcome {
    let start = Instant::now();
    let p = DkParams { m: -0.5, b: vec![0.6, 0.6], k_max: 512, n: 1, free_radius: None, cost_cap: DEFAULT_COST_CAP };
    let slope = compute_dk(&p).unwrap().slope().unwrap().slope;
    let want = dk_predicted_slope(p.m, &p.b, p.n);
    let secs = start.elapsed().as_secs_f64();
    let ok = (slope - want).abs() <= 0.15 && secs < 60.0;
    (ok, format!("d_k asymptotics (K=512): slope {slope:.3}, predicted {want:.3} (+- 0.15), {secs:.1} s (< 60 s)"))
}

fn growth_slopes() -> Outcome {
    let start = Instant::now();
    let slopes = |m: usize| {
        let g = Grid::new(1, 512.0, m).unwrap();
        let run = |family| {
            let p = GrowthParams { family, a_values: vec![2, 3, 4, 5, 6], inputs: 2, r: 1.0 };
            prop74_growth_experiment(&g, &p).unwrap().fit.slope
        };
        (run(SlotFamily::SingleSlot), run(SlotFamily::AllSlots))
    };
    let (s, a) = slopes(512);
    let secs = start.elapsed().as_secs_f64();
    // at M = 512 the spacing is 1, so refine once to confirm the slopes are
    // not a sampling artefact
    let (s2, a2) = slopes(1024);
    let drift = (s2 - s).abs().max((a2 - a).abs());
    let ok = (s - 1.0).abs() <= 0.1 && (a - 3.0).abs() <= 0.15 && secs < 180.0 && drift < 0.05;
    (
        ok,
        format!(
            "slot growth (M=512): single_slot slope {s:.3} (1 +- 0.1), all_slots slope {a:.3} (3 +- 0.15), {secs:.1} s (< 180 s); slope drift at M=1024 {drift:.3} (< 0.05)"
        ),
    )
}

fn norm_equivalences() -> Outcome {
    const C: f64 = 8.0;
    let g = Grid::new(1, 16.0, 128).unwrap();
    let fams = [FamilySpec::Wavepacket { count: 3, width: 0.7, band: 4.0 }, FamilySpec::TrigPoly { band: 4.0 }];
    let fs: Vec<Field> = (0..50)
        .map(|t| {
            let mut rng = trial_rng(909, t);
            fams[t as usize % 2].sample(&g, &mut rng).unwrap()
        })
        .collect();
    let kp = KernelParams::default_for(1);
    let env = Field::from_real_fn(g, Side::Physical, |x| (-x[0] * x[0]).exp());
    let decay = 4.0;
    let tail: f64 = (-8..=8).map(|d: i32| japanese(&[((d.abs() as f64) - 0.5).max(0.0)]).powf(-decay)).sum();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (mut elo, mut ehi) = (f64::INFINITY, 0.0f64);
    let mut analytic = true;
    for p in [1.0, 2.0, 4.0, f64::INFINITY] {
        for f in &fs {
            let r = sqrt_s_square_norm(f, p, kp).unwrap() / amalgam_norm(f, AmalgamParams::new(2.0, p)).unwrap();
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let rep = equivalent_amalgam_check(&fs, &env, decay, AmalgamParams::new(2.0, p)).unwrap();
        elo = elo.min(rep.min_ratio);
        ehi = ehi.max(rep.max_ratio);
        analytic &= rep.min_ratio >= rep.c1 * (1.0 - 1e-9) && rep.max_ratio <= rep.c2 * tail * (1.0 + 1e-9);
    }
    let inside = |a: f64, b: f64| a >= 1.0 / C && b <= C;
    let ok = inside(lo, hi) && inside(elo, ehi) && analytic;
    (
        ok,
        format!(
            "norm equivalences, 50 fields, p in {{1,2,4,inf}}: S-kernel ratios [{lo:.3}, {hi:.3}], envelope ratios [{elo:.3}, {ehi:.3}] (inside [1/{C}, {C}]); envelope sandwich bounds {}",
            if analytic { "hold" } else { "violated" }
        ),
    )
}

fn lattice_construction() -> Outcome {
    let g = Grid::new(1, 2.0 * PI * 8.0, 512).unwrap();
    let radius = 6;
    let g0 = build_lattice_test_function(&LatticeSeq::point_mass(1, 1), &g).unwrap();
    let env_sum = |k: u32| -> f64 {
        let m = g0.map(|z| num_complex_norm_pow(z, k));
        local_norms(&m, f64::INFINITY, 2.0 * PI).unwrap().iter().sum()
    };
    let root = (2.0 * PI).sqrt();
    let (f_lo, f_hi) = (root, root * env_sum(1));
    let (t_lo, t_hi) = (root, root * env_sum(2));
    let w = WeightSpec::Power { m: -0.5 };
    let on = OnLattice { weight: &w, dim: 1 };
    let v = LatticeSeq::from_fn(1, radius, 2, |nu| mpdo_core::weights::LatticeWeight::value(&on, nu)).unwrap();
    let sym = build_lattice_symbol(&v, &g).unwrap();
    let (mut fr, mut tr) = (Vec::new(), Vec::new());
    for t in 0..20 {
        let mut rng = trial_rng(1010, t);
        let a: Vec<LatticeSeq> =
            (0..2).map(|_| LatticeSeq::from_fn(1, radius, 1, |_| rng.random_range(0.0..1.0)).unwrap()).collect();
        let fs: Vec<Field> = a.iter().map(|s| build_lattice_test_function(s, &g).unwrap()).collect();
        for q in [2.0, 4.0, f64::INFINITY] {
            for (f, s) in fs.iter().zip(&a) {
                fr.push(amalgam_norm_2pi(f, AmalgamParams::new(2.0, q)).unwrap() / s.l2_norm());
            }
        }
        let out = evaluate(&sym, &fs).unwrap();
        let dk = lattice_dk(&v, &a).unwrap();
        let dn = dk.iter().map(|(_, d)| d * d).sum::<f64>().sqrt();
        for r in [1.0, 2.0, f64::INFINITY] {
            tr.push(amalgam_norm_2pi(&out, AmalgamParams::new(2.0, r)).unwrap() / dn);
        }
    }
    let span = |v: &[f64]| (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(0.0, f64::max));
    let (a, b) = span(&fr);
    let (c, d) = span(&tr);
    let tol = 1e-9;
    let ok = a >= f_lo * (1.0 - tol) && b <= f_hi * (1.0 + tol) && c >= t_lo * (1.0 - tol) && d <= t_hi * (1.0 + tol);
    (
        ok,
        format!(
            "lattice construction, 20 coefficient tuples: |f|/|A| in [{a:.3}, {b:.3}] within [{f_lo:.3}, {f_hi:.3}]; |T|/|d_k| in [{c:.3}, {d:.3}] within [{t_lo:.3}, {t_hi:.3}]"
        ),
    )
}

fn num_complex_norm_pow(z: mpdo_core::Complex64, k: u32) -> mpdo_core::Complex64 {
    mpdo_core::Complex64::new(z.norm().powi(k as i32), 0.0)
}

fn strip_wall_time(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.contains("\"wall_time_s\"")).collect::<Vec<_>>().join("\n")
}

fn determinism() -> Outcome {
    let configs = [
        r#"{"command":"eval","grid":{"n":1,"L":16,"M":64},
            "symbol":{"id":"band-limited","radii":[2,2,2],"terms":4,"seed":9},
            "functions":[{"kind":"random"},{"kind":"random"}],"eval":{"path":"direct"},"seed":3}"#,
        r#"{"command":"bound-experiment","grid":{"n":1,"L":16,"M":64},
            "symbol":{"id":"band-limited","radii":[1,1,1],"terms":3,"seed":2},
            "weight":"power:-0.5","exponents":{"q":[2,2],"r":1},"seed":11,
            "bound":{"trials":6,"scales":[1,2],"grid_x":{"n":1,"L":8,"M":16},"grid_xi":{"n":1,"L":16,"M":32}}}"#,
        r#"{"command":"weight-test","weight":"power:-0.5","weight_test":{"radii":[4,8]}}"#,
        r#"{"command":"dk","dk":{"m":-0.5,"b":[0.6,0.6],"k_max":64,"n":1}}"#,
    ];
    let mut same = 0;
    for text in configs {
        let cfg = parse_config_str(text).unwrap().materialize(None, None).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d8 = tempfile::tempdir().unwrap();
        run_with_threads(&cfg, d1.path(), 1).unwrap();
        run_with_threads(&cfg, d8.path(), 8).unwrap();
        let mut eq = strip_wall_time(&d1.path().join("result.json")) == strip_wall_time(&d8.path().join("result.json"));
        for extra in ["table.csv", "field.fld"] {
            let (a, b) = (d1.path().join(extra), d8.path().join(extra));
            if a.exists() || b.exists() {
                eq &= std::fs::read(&a).ok() == std::fs::read(&b).ok();
            }
        }
        same += eq as usize;
    }
    (same == configs.len(), format!("determinism: {same}/{} configs byte-identical on 1 vs 8 threads (result.json without wall time, tables, field files)", configs.len()))
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 11] = [
        (1, identity_symbol),
        (2, separable_oracle),
        (3, partition_residuals),
        (4, weight_dichotomy),
        (5, single_block_exactness),
        (6, bound_scaling),
        (7, dk_asymptotics),
        (8, growth_slopes),
        (9, norm_equivalences),
        (10, lattice_construction),
        (11, determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let (ok, msg) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {why}"))
        });
        println!("{} criterion {id}: {msg}", if ok { "PASS" } else { "FAIL" });
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
