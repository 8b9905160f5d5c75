use rayon::prelude::*;
use serde_json::{json, Value};
use smallball::concentration::{
    mc::draw, q_exact, q_monte_carlo, q_weighted_sum, substream_seed, CoordinateOptions, DiscreteSampler,
    MCConfig, Method, WeightedSumSampler,
};
use smallball::dist::AtomicMeasure;
use smallball::gap::{beta, SearchConfig, Thm1Config};
use smallball::infdiv::{
    eq11366_report, esseen_integral, h_cf, lemma1_rhs, mass_at_zero, q_smoothing, EsseenConfig, LemmaConfig,
    SmoothingLaw, ZeroMassConfig,
};
use smallball::inverse::{
    default_n_prime, fit_gap, plant, verify_thm2, verify_thm3, verify_thm4, FitConfig, PlantSpec, StructureConfig,
    StructureReport, Thm2Config, Thm2Params,
};
use smallball::num::{self, Rational};
use smallball::report::BoundReport;

use crate::params::Params;
use crate::CliError;

pub enum Outcome {
    /// A JSON document with no bound rows.
    Doc(Value),
    /// A JSON document and the bound reports it contains.
    Bounds(Value, Vec<BoundReport>),
    /// Long-form rows (sweeps).
    Table { header: Vec<String>, rows: Vec<Vec<String>> },
}

fn mc(params: &Params, seed: u64) -> Result<MCConfig, CliError> {
    let mut cfg = MCConfig {
        seed,
        ..MCConfig::default()
    };
    if params.has("samples") {
        cfg.sample_count = params.usize("samples")?;
    }
    Ok(cfg)
}

pub fn dispatch(name: &str, params: &mut Params, seed: u64) -> Result<Outcome, CliError> {
    match name {
        "q" => q(params, seed).map(Outcome::Doc),
        "smooth" => smooth(params, seed).map(Outcome::Doc),
        "lemma1" => lemma1(params, seed).map(|r| Outcome::Bounds(r.to_json(), vec![r])),
        "thm1" => thm1(params, seed).map(|r| Outcome::Bounds(r.to_json(), vec![r])),
        "fit" => fit(params).map(Outcome::Doc),
        "thm2" => thm2(params, seed),
        "thm3" | "thm4" => structure(name, params, seed).map(|r| Outcome::Bounds(r.to_json(), r.reports)),
        "beta" => beta_cmd(params).map(Outcome::Doc),
        "plant" => plant_cmd(params, seed).map(Outcome::Doc),
        "sweep" => sweep(params, seed),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}

fn q(params: &mut Params, seed: u64) -> Result<Value, CliError> {
    params.set_default("tau", "0");
    params.set_default("method", "auto");
    let tau = params.rational("tau")?;
    let method = params.string("method")?;
    let dist = params.dist()?;
    let mc = mc(params, seed)?;
    let result = if params.inputs.contains_key("weights") {
        let a = params.weights()?;
        match method.as_str() {
            "auto" | "exact" => {
                let opts = CoordinateOptions { mc, ..Default::default() };
                let r = q_weighted_sum(&a, &dist, &tau, &opts)?;
                if method == "exact" && r.method != Method::Exact {
                    return Err(CliError::Compute(
                        smallball::dist::Error::BudgetExceeded { budget: opts.sum.budget }.into(),
                    ));
                }
                r
            }
            "mc" => q_monte_carlo(&WeightedSumSampler::new(&a, &dist), num::to_f64(&tau), &mc)?,
            m => return Err(CliError::Usage(format!("unknown method {m}"))),
        }
    } else {
        match method.as_str() {
            "auto" | "exact" => q_exact(&dist, &tau)?,
            "mc" => q_monte_carlo(&DiscreteSampler::new(&dist), num::to_f64(&tau), &mc)?,
            m => return Err(CliError::Usage(format!("unknown method {m}"))),
        }
    };
    Ok(result.to_json())
}

fn smoothing_law(params: &Params) -> Result<SmoothingLaw, CliError> {
    Ok(SmoothingLaw::new(params.weights()?, params.rational("lambda")?)?)
}

fn smooth(params: &mut Params, seed: u64) -> Result<Value, CliError> {
    params.set_default("op", "zero");
    let law = smoothing_law(params)?;
    let op = params.string("op")?;
    let mc = mc(params, seed)?;
    Ok(match op.as_str() {
        "cf" => {
            let d = law.dim();
            let ts: Vec<Vec<f64>> = params
                .list("t")?
                .iter()
                .map(|v| match v {
                    Value::Array(xs) => xs.iter().map(|x| x.as_f64()).collect::<Option<Vec<_>>>(),
                    Value::Number(n) => n.as_f64().map(|x| vec![x]),
                    Value::String(s) => s.split(';').map(|x| x.trim().parse().ok()).collect(),
                    _ => None,
                })
                .map(|t| t.filter(|t| t.len() == d))
                .collect::<Option<_>>()
                .ok_or_else(|| CliError::Usage(format!("each t must have {d} coordinates")))?;
            let cf: Vec<f64> = ts.iter().map(|t| h_cf(&law, t)).collect();
            json!({ "t": ts, "cf": cf })
        }
        "sample" => {
            params.set_default("samples", "10");
            let count = params.usize("samples")?;
            let flat = draw(&law, count, seed);
            let rows: Vec<&[f64]> = flat.chunks(law.dim()).collect();
            json!({ "samples": rows, "second_moment": law.second_moment() })
        }
        "zero" => {
            let z = mass_at_zero(&law, &ZeroMassConfig { mc: Some(mc), ..Default::default() })?;
            serde_json::to_value(z).expect("serializes")
        }
        "esseen" => {
            let b = esseen_integral(&law, params.f64("delta")?, &EsseenConfig::default())?;
            serde_json::to_value(b).expect("serializes")
        }
        "q" => {
            let cfg = LemmaConfig { mc, ..Default::default() };
            serde_json::to_value(q_smoothing(&law, params.f64("delta")?, &cfg)?).expect("serializes")
        }
        other => return Err(CliError::Usage(format!("unknown smooth op {other}"))),
    })
}

fn lemma1(params: &mut Params, seed: u64) -> Result<BoundReport, CliError> {
    params.set_default("variant", "lemma1");
    params.set_default("tau", "0");
    let a = params.weights()?;
    let dist = params.dist()?;
    let mc = mc(params, seed)?;
    let cfg = LemmaConfig {
        mc: mc.clone(),
        zero: ZeroMassConfig { mc: Some(mc), ..Default::default() },
        ..Default::default()
    };
    Ok(match params.string("variant")?.as_str() {
        "lemma1" => lemma1_rhs(
            &a,
            &dist,
            &params.rational("tau")?,
            &params.rational("kappa")?,
            &params.rational("delta")?,
            &cfg,
        )?,
        "eq11366" => eq11366_report(&a, &dist, &cfg)?,
        other => return Err(CliError::Usage(format!("unknown lemma1 variant {other}"))),
    })
}

fn thm1(params: &mut Params, seed: u64) -> Result<BoundReport, CliError> {
    params.set_default("tau", "0");
    params.set_default("r", "1");
    params.set_default("m", "3");
    let cfg = Thm1Config {
        search: SearchConfig::default(),
        lhs: CoordinateOptions { mc: mc(params, seed)?, ..Default::default() },
    };
    Ok(smallball::gap::thm1_rhs(
        &params.weights()?,
        &params.dist()?,
        &params.rational("tau")?,
        &params.rational("kappa")?,
        &params.rational("delta")?,
        params.usize("r")?,
        params.u64("m")?,
        &cfg,
    )?)
}

fn fit(params: &mut Params) -> Result<Value, CliError> {
    let a = params.weights()?;
    params.set_default("tol", "0");
    params.set_default("n_prime", (a.len() / 10).max(1).to_string());
    params.set_default("rank_cap", "4");
    params.set_default("volume_cap", "25");
    let report = fit_gap(
        &a,
        &params.rational("tol")?,
        params.usize("n_prime")?,
        params.usize("rank_cap")?,
        params.u64("volume_cap")?,
        &FitConfig::default(),
    )?;
    Ok(report.to_json())
}

fn thm2(params: &mut Params, seed: u64) -> Result<Outcome, CliError> {
    for (k, v) in [("tau", "0"), ("eps", "1"), ("theta", "0.5"), ("A", "1"), ("B", "1"), ("rho_n", "1")] {
        params.set_default(k, v);
    }
    let a = params.weights()?;
    let p = Thm2Params {
        tau: params.rational("tau")?,
        eps: params.f64("eps")?,
        theta: params.f64("theta")?,
        a_exp: params.f64("A")?,
        b_exp: params.f64("B")?,
        rho_n: params.rational("rho_n")?,
        n_prime: params.opt_usize("n_prime")?,
    };
    let mut cfg = Thm2Config {
        coordinates: CoordinateOptions { mc: mc(params, seed)?, ..Default::default() },
        ..Default::default()
    };
    if params.has("rank_cap") {
        cfg.rank_cap = params.usize("rank_cap")?;
    }
    if params.has("ratio_threshold") {
        cfg.ratio_threshold = params.f64("ratio_threshold")?;
    }
    cfg.volume_cap = params.has("volume_cap").then(|| params.u64("volume_cap")).transpose()?;
    let report = verify_thm2(&a, &params.dist()?, &p, &cfg)?;
    let mut doc = report.to_json();
    doc["params"]["default_n_prime"] = default_n_prime(a.len(), p.eps, p.theta).into();
    Ok(Outcome::Bounds(doc, report.bounds))
}

fn structure(name: &str, params: &mut Params, seed: u64) -> Result<StructureReport, CliError> {
    let a = params.weights()?;
    let d = a.dim();
    let repeat = |v: &str| vec![v; d].join(",");
    params.set_default("taus", repeat("1"));
    params.set_default("deltas", repeat("1"));
    let mut cfg = StructureConfig {
        coordinates: CoordinateOptions { mc: mc(params, seed)?, ..Default::default() },
        ..Default::default()
    };
    if params.has("rank_cap") {
        cfg.rank_cap = params.usize("rank_cap")?;
    }
    let taus = params.rational_list("taus")?;
    let deltas = params.rational_list("deltas")?;
    let dist = params.dist()?;
    Ok(if name == "thm3" {
        verify_thm3(&a, &dist, &taus, &deltas, &cfg)?
    } else {
        params.set_default("A", "1");
        params.set_default("B", "1");
        verify_thm4(&a, &dist, &taus, &deltas, params.f64("A")?, params.f64("B")?, &cfg)?
    })
}

fn beta_cmd(params: &mut Params) -> Result<Value, CliError> {
    params.set_default("scale", "1");
    params.set_default("r", "1");
    params.set_default("m", "3");
    params.set_default("tau", "0");
    let w: AtomicMeasure = match params.inputs.get("measure") {
        Some(path) => crate::params::read_json(path)?,
        None => AtomicMeasure::levy_base(&params.weights()?),
    };
    let w = w.scaled(&params.rational("scale")?);
    let b = beta(
        &w,
        params.usize("r")?,
        params.u64("m")?,
        &params.rational("tau")?,
        &SearchConfig::default(),
    )?;
    Ok(json!({
        "value": num::to_json(&b.value),
        "witness": b.witness.to_json(),
        "candidates": b.candidates,
        "exhaustive": b.exhaustive,
        "evaluated": b.evaluated,
    }))
}

fn plant_cmd(params: &mut Params, seed: u64) -> Result<Value, CliError> {
    for (k, v) in [("rank", "1"), ("n", "20"), ("d", "1"), ("noise", "0"), ("outlier_fraction", "0")] {
        params.set_default(k, v);
    }
    params.set_default("generators", "random");
    let generators = match params.values.get("generators") {
        Some(Value::String(s)) if s == "random" => None,
        Some(Value::String(s)) => Some(parse_generators(
            &serde_json::from_str(s).map_err(|e| CliError::Usage(format!("generators: {e}")))?,
        )?),
        Some(v) => Some(parse_generators(v)?),
        None => None,
    };
    let rank = generators.as_ref().map_or(params.usize("rank"), |g| Ok(g.len()))?;
    let limits = if params.has("limits") {
        params
            .list("limits")?
            .iter()
            .map(|v| match v {
                Value::Number(n) => n.as_u64(),
                Value::String(s) => s.parse().ok(),
                _ => None,
            })
            .collect::<Option<Vec<u64>>>()
            .ok_or_else(|| CliError::Usage("limits must be nonnegative integers".into()))?
    } else {
        vec![1; rank]
    };
    let spec = PlantSpec {
        generators,
        rank,
        limits,
        n: params.usize("n")?,
        d: params.usize("d")?,
        noise: params.f64("noise")?,
        outlier_fraction: params.f64("outlier_fraction")?,
        seed,
    };
    let inst = plant(&spec).map_err(|e| match e {
        smallball::inverse::Error::DegenerateSpec(s) => CliError::Usage(s),
        other => other.into(),
    })?;
    Ok(serde_json::to_value(inst).expect("serializes"))
}

/// `[[g11, g12], ...]`, or a flat list of scalar generators.
fn parse_generators(v: &Value) -> Result<Vec<Vec<Rational>>, CliError> {
    let err = || CliError::Usage(format!("cannot read generators from {v}"));
    let rows = v.as_array().ok_or_else(err)?;
    rows.iter()
        .map(|row| match row {
            Value::Array(xs) => xs.iter().map(|x| num::from_json(x).map_err(|_| err())).collect(),
            x => num::from_json(x).map(|g| vec![g]).map_err(|_| err()),
        })
        .collect()
}

/// `start:stop:count` (inclusive, evenly spaced) or an explicit list.
fn sweep_values(params: &Params) -> Result<Vec<Value>, CliError> {
    if let Some(Value::String(s)) = params.values.get("values") {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 {
            let bound = |t: &str| num::parse_rational(t).map_err(|e| CliError::Usage(e.to_string()));
            let (lo, hi) = (bound(parts[0])?, bound(parts[1])?);
            let k: i64 = parts[2]
                .parse()
                .map_err(|_| CliError::Usage(format!("grid count {} is not an integer", parts[2])))?;
            if k < 1 {
                return Err(CliError::Usage("grid needs at least one point".into()));
            }
            if k == 1 {
                return Ok(vec![num::to_json(&lo)]);
            }
            let step = (&hi - &lo) / num::int(k - 1);
            return Ok((0..k).map(|i| num::to_json(&(&lo + &step * num::int(i)))).collect());
        }
    }
    params.list("values")
}

const SWEEP_TARGETS: [&str; 6] = ["q", "zero", "lemma1", "eq11366", "thm1", "beta"];

fn sweep(params: &mut Params, seed: u64) -> Result<Outcome, CliError> {
    let target = params.string("target")?;
    if !SWEEP_TARGETS.contains(&target.as_str()) {
        return Err(CliError::Usage(format!(
            "sweep target must be one of {}",
            SWEEP_TARGETS.join(", ")
        )));
    }
    let key = params.string("param")?;
    let values = sweep_values(params)?;
    let mut base = params.clone();
    for k in ["target", "param", "values"] {
        base.values.remove(k);
    }
    let rows: Vec<Result<Vec<String>, CliError>> = values
        .par_iter()
        .enumerate()
        .map(|(cell, value)| {
            let mut p = base.clone();
            p.values.insert(key.clone(), value.clone());
            let cell_seed = substream_seed(seed, cell as u64);
            let (id, report) = sweep_cell(&target, &mut p, cell_seed)?;
            let echo = json!({ "inputs": p.inputs, "params": p.values, "seed": cell_seed });
            let mut row = vec![cell.to_string(), target.clone(), key.clone(), value_text(value)];
            row.extend(match report {
                Some(mut r) => {
                    r.params.insert("run".into(), echo);
                    r.csv_record()
                }
                None => vec![
                    id.0,
                    num::format_f64(id.1),
                    String::new(),
                    String::new(),
                    "false".into(),
                    String::new(),
                    echo.to_string(),
                ],
            });
            Ok(row)
        })
        .collect();
    let mut header: Vec<String> = ["cell", "target", "param", "value"].map(String::from).to_vec();
    header.extend(BoundReport::CSV_HEADER.iter().map(|s| s.to_string()));
    Ok(Outcome::Table {
        header,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One sweep cell: a bound report, or a named quantity and its value.
fn sweep_cell(target: &str, p: &mut Params, seed: u64) -> Result<((String, f64), Option<BoundReport>), CliError> {
    let none = (String::new(), 0.0);
    Ok(match target {
        "q" => {
            let v = q(p, seed)?;
            let x = match &v["value"] {
                Value::String(s) => num::to_f64(&num::parse_rational(s).expect("own output")),
                other => other.as_f64().unwrap_or(f64::NAN),
            };
            (("q".into(), x), None)
        }
        "zero" => {
            let law = smoothing_law(p)?;
            let z = mass_at_zero(&law, &ZeroMassConfig { mc: Some(mc(p, seed)?), ..Default::default() })?;
            (("mass_at_zero".into(), z.value), None)
        }
        "lemma1" => (none, Some(lemma1(p, seed)?)),
        "eq11366" => {
            p.values.insert("variant".into(), "eq11366".into());
            (none, Some(lemma1(p, seed)?))
        }
        "thm1" => (none, Some(thm1(p, seed)?)),
        "beta" => {
            let v = beta_cmd(p)?;
            let x = num::to_f64(&num::from_json(&v["value"]).expect("own output"));
            (("beta".into(), x), None)
        }
        _ => unreachable!("checked by caller"),
    })
}
