//! Oracle cross-checks over seeded random instances (or one given file).

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde_json::json;
use stoch_tree::closest_pair::{threshold_chain, threshold_cubic, threshold_quadratic_checked};
use stoch_tree::expectation::{expected_approx, expected_exact};
use stoch_tree::lvd::{build_lvd, enumerate_centers};
use stoch_tree::oracle::{enum_expected, enum_threshold, naive_centers, probe_lnn};
use stoch_tree::reduction::reduce;
use stoch_tree::{generate_random, Instance, Length, ProbModel};

#[derive(Args)]
pub struct ValidateArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest random point count (enumeration needs at most 24 uncertain points).
    #[arg(long, default_value_t = 10)]
    max_n: usize,
    /// Validate this instance instead of random ones.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-4)
}

fn thresholds(inst: &Instance) -> Vec<Length> {
    let n = inst.len();
    let mut ds: Vec<Length> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.point_dist(i, j))
        .collect();
    ds.sort_unstable();
    ds.dedup();
    let mut out = vec![Length::from_f64(0.01).expect("finite")];
    for (i, &d) in ds.iter().enumerate() {
        if i > 0 {
            out.push(Length::mid(ds[i - 1], d));
        }
        out.push(d);
    }
    out
}

type Check = fn(&Instance) -> Result<(), String>;

fn threshold_sweep(inst: &Instance) -> Result<(), String> {
    let space = reduce(inst).map_err(|e| e.to_string())?;
    for l in thresholds(inst) {
        let l = Length::from_f64(l.to_f64()).expect("finite");
        let want = enum_threshold(inst, l.to_f64()).map_err(|e| e.to_string())?;
        for (name, f) in [
            ("cubic", threshold_cubic as fn(_, _) -> _),
            ("quadratic", threshold_quadratic_checked),
            ("chain", threshold_chain),
        ] {
            let got = f(&space, l).map_err(|e| e.to_string())?;
            if !close(got, want) {
                return Err(format!("{name} at {l}: {got} vs enumeration {want}"));
            }
        }
    }
    Ok(())
}

fn expectation_sandwich(inst: &Instance) -> Result<(), String> {
    let oracle = enum_expected(inst).map_err(|e| e.to_string())?;
    let exact = expected_exact(inst).map_err(|e| e.to_string())?;
    if !close(exact, oracle) {
        return Err(format!("exact {exact} vs enumeration {oracle}"));
    }
    for eps in [0.5, 0.1, 0.01] {
        let r = expected_approx(inst, eps).map_err(|e| e.to_string())?;
        let hi = (1.0 + eps) * r.value;
        if !(r.value <= oracle || close(r.value, oracle)) || !(oracle <= hi || close(oracle, hi)) {
            return Err(format!("eps {eps}: E = {} outside sandwich of {oracle}", r.value));
        }
        if r.queries > r.query_bound {
            return Err(format!("eps {eps}: {} queries exceed bound {}", r.queries, r.query_bound));
        }
    }
    Ok(())
}

fn center_sets(inst: &Instance) -> Result<(), String> {
    let a = enumerate_centers(inst).map_err(|e| e.to_string())?;
    let b = naive_centers(inst).map_err(|e| e.to_string())?;
    if a != b {
        return Err(format!("{} enumerated vs {} naive centers differ", a.len(), b.len()));
    }
    Ok(())
}

fn probe_equality(inst: &Instance) -> Result<(), String> {
    for k in [1, 2, 5].into_iter().filter(|&k| k <= inst.len()) {
        let (lvd, _) = build_lvd(inst, k).map_err(|e| e.to_string())?;
        for p in probe_lnn(inst, k).map_err(|e| e.to_string())? {
            let got = match p.edge {
                Some(e) => lvd.query(e, p.offset).map_err(|e| e.to_string())?.to_vec(),
                None => lvd.answer(0).to_vec(),
            };
            if got != p.answer {
                return Err(format!("k {k} at {:?}: {got:?} vs direct {:?}", p.location, p.answer));
            }
        }
    }
    Ok(())
}

fn size_bounds(inst: &Instance) -> Result<(), String> {
    let n = inst.len();
    for k in [1, 2, 5].into_iter().filter(|&k| k <= n) {
        let (_, s) = build_lvd(inst, k).map_err(|e| e.to_string())?;
        if s.cell_count > s.xi + 1 {
            return Err(format!("k {k}: {} cells exceed xi + 1 = {}", s.cell_count, s.xi + 1));
        }
        for d in 1..n.max(2) {
            if s.shallow_degree_sum(d) > 8 * (d * n) as u64 {
                return Err(format!("k {k}: shallow degree sum exceeds 8dn at d = {d}"));
            }
        }
    }
    Ok(())
}

pub fn run(args: &ValidateArgs, json: bool) -> Result<bool> {
    if args.max_n == 0 {
        bail!("--max-n must be at least 1");
    }
    let instances: Vec<(String, Instance)> = match &args.input {
        Some(p) => vec![(p.display().to_string(), super::load(p)?.normalize())],
        None => (args.seed..args.seed + args.seeds)
            .map(|s| {
                let t = 2 + (s as usize * 7) % 20;
                let n = 1 + (s as usize * 5) % args.max_n;
                let model = if s % 2 == 0 { ProbModel::Uniform } else { ProbModel::Fixed(0.5) };
                generate_random(t, n, s, model).map(|i| (format!("seed {s}"), i.normalize()))
            })
            .collect::<Result<_, _>>()?,
    };
    let checks: [(&str, Check); 5] = [
        ("threshold sweep", threshold_sweep),
        ("expectation sandwich", expectation_sandwich),
        ("center sets", center_sets),
        ("probe answers", probe_equality),
        ("size bounds", size_bounds),
    ];
    let mut ok = true;
    let mut report = Vec::new();
    for (name, check) in checks {
        let failure = instances
            .iter()
            .find_map(|(label, inst)| check(inst).err().map(|e| format!("{label}: {e}")));
        ok &= failure.is_none();
        if json {
            report.push(json!({ "check": name, "pass": failure.is_none(), "detail": failure }));
        } else {
            match failure {
                None => println!("PASS {name} ({} instances)", instances.len()),
                Some(f) => println!("FAIL {name}: {f}"),
            }
        }
    }
    if json {
        println!("{}", json!({ "pass": ok, "checks": report }));
    }
    Ok(ok)
}
