use std::fmt::Write as _;
use std::path::Path;

use affinv::decompose::{cleanup, cleanup_bound, select_subcell, strong_decompose, super_decompose, DecompositionConfig, Schedule};
use affinv::field::distance;
use affinv::forms::{consistency_check, cs_complexity, dimension_d, CellImage, Complexity, ComplexityBudget};
use affinv::gowers::{gowers_norm, GowersMethod, GowersMode};
use affinv::io::{
    format_constraint, format_factor, format_function_table, load_constraints, load_factor, load_function_table, load_real_table,
};
use affinv::poly::{bias_certificate, degree_index, CellId, CellPartition, PolynomialFactor};
use affinv::tester::{affine_subspace_test, distance_to_enumerable_property, Property, Verdict};
use affinv::{Error, Result, DEFAULT_ENUMERATION_BUDGET, DEFAULT_SEARCH_BUDGET};
use affinv_harness::{experiments, fixtures};
use serde_json::{json, Value};

use crate::{record, Cli, Command, DecomposeArgs, DecomposeMode, FixtureKind, GenerateArgs, EXIT_USAGE};

pub struct Output {
    pub text: String,
    pub json: Value,
    pub code: u8,
}

impl Output {
    fn ok(text: String, json: Value) -> Self {
        Output { text, json, code: 0 }
    }
}

/// Budget errors and exhausted sampling map to 2, bad input to 64, and the
/// remaining failures to 1.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::NoSubcellAccepted { .. } => 2,
        Error::Parse { .. }
        | Error::Io(_)
        | Error::InvalidArgument(_)
        | Error::ShapeMismatch(_)
        | Error::NormalForm(_)
        | Error::LabelOutOfRange { .. }
        | Error::NotPrime(_)
        | Error::DimensionMismatch { .. }
        | Error::DomainTooLarge { .. } => EXIT_USAGE,
        _ => 1,
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_row<I, T>(w: &mut csv::Writer<std::fs::File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_list(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidArgument(format!("not a field element: {t:?}"))))
        .collect()
}

pub fn run(cli: &Cli) -> Result<Output> {
    let budget = cli.budget.unwrap_or(DEFAULT_ENUMERATION_BUDGET);
    let search_budget = cli.budget.unwrap_or(DEFAULT_SEARCH_BUDGET);
    match &cli.command {
        Command::Complexity { constraints } => complexity(constraints),
        Command::Gowers(a) => {
            let f = match (&a.table, &a.function) {
                (Some(t), _) => load_real_table(t)?,
                (None, Some(f)) => {
                    let f = load_function_table(f)?;
                    if a.label == 0 || a.label > f.range() {
                        return Err(Error::LabelOutOfRange { label: a.label, range: f.range() });
                    }
                    f.indicator(a.label)
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            let method = match a.samples {
                Some(samples) => GowersMethod::MonteCarlo { samples, seed: a.seed },
                None => GowersMethod::Exact { budget },
            };
            let g = gowers_norm(&f, a.k, method)?;
            let text = match g.mode {
                GowersMode::Exact => format!("{}\n", g.value),
                GowersMode::MonteCarlo => format!("{} +- {} ({} samples, seed {})\n", g.value, g.stderr, g.samples, g.seed),
            };
            Ok(Output::ok(text, to_json(&g)))
        }
        Command::Dimension { constraints, d } => {
            let c = load_constraints(constraints)?;
            let dims = c
                .collection
                .members()
                .iter()
                .map(|ic| dimension_d(ic.constraint().forms(), *d, ic.constraint().p()))
                .collect::<Result<Vec<_>>>()?;
            let text = dims.iter().map(|v| format!("{v}\n")).collect();
            Ok(Output::ok(text, json!({ "d": d, "dimensions": dims })))
        }
        Command::Consistency(a) => {
            let c = load_constraints(&a.constraints)?;
            let degrees = match &a.factor {
                Some(path) => load_factor(path)?.degrees(),
                None => a.degrees.clone(),
            };
            let rows = a.images.split(';').map(parse_list).collect::<Result<Vec<_>>>()?;
            let images = CellImage::new(rows)?;
            let verdicts = c
                .collection
                .members()
                .iter()
                .map(|ic| consistency_check(ic.constraint(), &degrees, &images))
                .collect::<Result<Vec<bool>>>()?;
            let text = verdicts.iter().map(|&v| if v { "consistent\n" } else { "inconsistent\n" }).collect();
            Ok(Output::ok(text, json!({ "degrees": degrees, "images": images.images(), "consistent": verdicts })))
        }
        Command::FactorStats { factor, bias_budget, seed, csv } => factor_stats(factor, *bias_budget, *seed, csv.as_deref(), budget),
        Command::Decompose(a) => decompose(a, search_budget, budget),
        Command::SelectSubcell {
            function,
            decomposition,
            delta,
            zeta,
            seed,
            max_attempts,
        } => {
            let f = load_function_table(function)?;
            let (_, d) = record::load(decomposition)?;
            let delta = delta.unwrap_or_else(|| Schedule::DefaultDelta.at(d.coarse.len()));
            let sel = select_subcell(&f, &d, delta, *zeta, *seed, *max_attempts)?;
            let text = format!(
                "subcell [{}] after {} attempt(s), deviating fraction {}\n",
                join(&sel.s),
                sel.attempts,
                sel.check.deviating_fraction
            );
            let mut json = to_json(&sel);
            json["delta"] = json!(delta);
            json["zeta"] = json!(zeta);
            json["seed"] = json!(seed);
            Ok(Output::ok(text, json))
        }
        Command::Cleanup {
            function,
            decomposition,
            subcell,
            zeta,
            out,
        } => {
            let f = load_function_table(function)?;
            let (_, d) = record::load(decomposition)?;
            let s = parse_list(subcell)?;
            let g = cleanup(&f, &d.coarse, &d.refined, &s, *zeta)?;
            let cert = bias_certificate(&d.coarse, budget, 0)?;
            let bound = cleanup_bound(f.range(), *zeta, &d.coarse, &cert);
            let dist = distance(&f, &g)?;
            if let Some(path) = out {
                write_file(path, &format_function_table(&g))?;
            }
            let text = format!("distance {dist}\nbound {bound}\n");
            Ok(Output::ok(
                text,
                json!({ "distance": dist, "bound": bound, "bias": cert, "subcell": s, "zeta": zeta }),
            ))
        }
        Command::Test {
            constraints,
            function,
            trials,
            ell,
            seed,
        } => {
            let c = load_constraints(constraints)?;
            let f = load_function_table(function)?;
            let r = affine_subspace_test(&f, &c.collection, *ell, *trials, *seed, search_budget)?;
            let code = match r.verdict {
                Verdict::Accept => 0,
                Verdict::Reject => 1,
                Verdict::Inconclusive => 2,
            };
            let mut text = format!(
                "{:?}: {} rejections, {} inconclusive in {} trials (ell {}, seed {})\n",
                r.verdict, r.rejections, r.inconclusive, r.trials, r.ell, r.seed
            );
            if let Some(w) = &r.witness {
                let pts: Vec<String> = w.witness.points().iter().map(|x| format!("({})", join(x.coords()))).collect();
                let _ = writeln!(text, "witness: trial {} member {} points {}", w.trial, w.member, pts.join(" "));
            }
            Ok(Output { text, json: to_json(&r), code })
        }
        Command::Distance { function, degree, tables } => {
            let f = load_function_table(function)?;
            let property = match degree {
                Some(d) => Property::DegreeAtMost(*d),
                None if !tables.is_empty() => Property::Explicit(tables.iter().map(load_function_table).collect::<Result<_>>()?),
                None => return Err(Error::InvalidArgument("give --degree or --tables".into())),
            };
            let dist = distance_to_enumerable_property(&f, &property, budget)?;
            Ok(Output::ok(format!("{dist}\n"), json!({ "distance": dist })))
        }
        Command::Experiment { criterion, seed, csv } => experiment(criterion, *seed, csv.as_deref()),
        Command::Generate(a) => generate(a),
    }
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn complexity(path: &Path) -> Result<Output> {
    let c = load_constraints(path)?;
    let mut text = String::new();
    let mut values = Vec::new();
    for ic in c.collection.members() {
        let a = ic.constraint();
        let cx = cs_complexity(a.forms(), a.p(), ComplexityBudget::default())?;
        match cx {
            Complexity::Exact(s) => text.push_str(&format!("{s}\n")),
            Complexity::Infinite => text.push_str("infinite\n"),
            Complexity::Unknown { lower, upper } => text.push_str(&format!("unknown in [{lower}, {upper}]\n")),
        }
        values.push(cx);
    }
    Ok(Output::ok(text, json!({ "complexity": values })))
}

fn factor_stats(path: &Path, bias_budget: u128, seed: u64, csv: Option<&Path>, budget: u128) -> Result<Output> {
    let b = load_factor(path)?;
    let part = CellPartition::with_budget(&b, budget)?;
    let cert = bias_certificate(&b, bias_budget, seed)?;
    let index = degree_index(&b);
    let counts = part.counts();
    let size = b.params().size() as f64;
    let (min, max) = (counts.iter().min().copied().unwrap_or(0), counts.iter().max().copied().unwrap_or(0));
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        csv_row(&mut w, path, ["cell", "count", "density"])?;
        for (i, &k) in counts.iter().enumerate() {
            let cell = CellId::from_index(i, b.params().p(), b.len());
            let coords: Vec<String> = cell.0.iter().map(u32::to_string).collect();
            csv_row(&mut w, path, [coords.join(" "), k.to_string(), (k as f64 / size).to_string()])?;
        }
        w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    let text = format!(
        "polynomials {}\ndegrees {:?}\ndegree index {:?}\ncells {} ({} nonempty)\ncell count range [{min}, {max}]\nmax bias {} ({} combinations, {})\n",
        b.len(),
        b.degrees(),
        index.counts(),
        part.num_cells(),
        part.num_nonempty(),
        cert.max_bias,
        cert.checked_combinations,
        if cert.exhaustive { "exhaustive" } else { "sampled" }
    );
    let json = json!({
        "polynomials": b.len(),
        "degrees": b.degrees(),
        "degree_index": index.counts(),
        "cells": part.num_cells(),
        "nonempty": part.num_nonempty(),
        "min_count": min,
        "max_count": max,
        "bias": cert,
    });
    Ok(Output::ok(text, json))
}

fn decompose(a: &DecomposeArgs, search_budget: u128, budget: u128) -> Result<Output> {
    let f = load_function_table(&a.function)?;
    let mut cfg = DecompositionConfig::new(a.d);
    cfg.search_budget = search_budget;
    cfg.gowers_budget = budget;
    cfg.seed = a.seed;
    if let Some(z) = a.zeta {
        cfg.zeta = z;
    }
    if let Some(d) = a.delta {
        cfg.delta = Schedule::Constant(d);
    }
    if a.for_subcells {
        cfg.delta = Schedule::for_subcells(cfg.delta.clone(), f.params().p());
    }
    if let Some(e) = a.eta {
        cfg.eta = Schedule::Constant(e);
    }
    cfg.coarse_gamma = a.coarse_gamma;
    if let Some(m) = a.max_factor_size {
        cfg.max_factor_size = m;
    }
    let (mode, d) = match a.mode {
        DecomposeMode::Strong => {
            let b0 = match &a.factor {
                Some(p) => load_factor(p)?,
                None => PolynomialFactor::trivial(*f.params()),
            };
            ("strong", strong_decompose(&f, &cfg, &b0)?)
        }
        DecomposeMode::Super => ("super", super_decompose(&f, &cfg)?),
    };
    let path = record::save(&a.out_dir, mode, &a.function, &cfg, &d)?;
    let text = format!(
        "{mode} decomposition: coarse {} refined {} inner {} polynomials, certified {}\nrefined factor:\n{}wrote {}\n",
        d.coarse.len(),
        d.refined.len(),
        d.inner.len(),
        d.certificates.certified,
        format_factor(&d.refined),
        path.display()
    );
    let json = json!({
        "mode": mode,
        "record": path.display().to_string(),
        "coarse_size": d.coarse.len(),
        "refined_size": d.refined.len(),
        "inner_size": d.inner.len(),
        "certificates": d.certificates,
    });
    Ok(Output::ok(text, json))
}

fn experiment(ids: &[u32], seed: u64, csv: Option<&Path>) -> Result<Output> {
    let suite: Vec<_> = experiments::default_suite()
        .into_iter()
        .filter(|s| ids.is_empty() || ids.contains(&s.criterion))
        .map(|mut s| {
            s.seed = seed;
            s
        })
        .collect();
    if suite.is_empty() {
        return Err(Error::InvalidArgument(format!("no criteria among {ids:?}")));
    }
    let mut reports = Vec::new();
    let mut text = format!("{:<3} {:<24} {:<5} summary\n", "id", "criterion", "pass");
    for spec in &suite {
        let r = experiments::run(spec)?;
        let _ = writeln!(text, "{:<3} {:<24} {:<5} {}", r.id, r.name, if r.passed { "yes" } else { "NO" }, r.summary);
        reports.push(r);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let _ = writeln!(text, "{} of {} criteria passed", reports.len() - failed, reports.len());
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        csv_row(&mut w, path, ["criterion", "name", "kind", "key", "value"])?;
        for r in &reports {
            for (kind, map) in [("tolerance", &r.tolerances), ("budget", &r.budgets), ("stat", &r.stats)] {
                for (k, v) in map {
                    csv_row(&mut w, path, [r.id.to_string(), r.name.clone(), kind.to_string(), k.clone(), v.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(Output {
        text,
        json: json!({ "seed": seed, "passed": failed == 0, "reports": reports }),
        code: if failed == 0 { 0 } else { 1 },
    })
}

fn generate(a: &GenerateArgs) -> Result<Output> {
    let (body, json) = match a.kind {
        FixtureKind::RandomFunction => {
            let r = a.r.unwrap_or(2);
            (format_function_table(&fixtures::random_function(a.p, a.n, r, a.seed)?), json!({}))
        }
        FixtureKind::DegreeDTable => (format_function_table(&fixtures::degree_d_table(a.p, a.n, a.d, a.seed)?), json!({})),
        FixtureKind::PlantedViolations => {
            let pv = fixtures::planted_violations(a.p, a.n, a.count, a.seed)?;
            let head = format!(
                "# planted points {}\n# violation density {}\n",
                pv.planted.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                pv.violation_density
            );
            (
                head + &format_function_table(&pv.table),
                json!({ "planted": pv.planted, "violation_density": pv.violation_density }),
            )
        }
        FixtureKind::LinearFactor => (format_factor(&fixtures::linear_factor(a.p, a.n, a.c, a.seed)?), json!({})),
        FixtureKind::RandomFactor => (format_factor(&fixtures::random_factor(a.p, a.n, a.c, a.d, a.seed)?), json!({})),
        FixtureKind::BlrConstraint => {
            let ic = fixtures::blr_constraint(a.p, a.sigma.clone())?;
            (format_constraint(&ic, a.r.unwrap_or(a.p)), json!({}))
        }
        FixtureKind::ApConstraint => {
            let ic = fixtures::ap_constraint(a.p, a.k, a.sigma.clone())?;
            let r = a.r.unwrap_or_else(|| ic.sigma().iter().copied().max().unwrap_or(1));
            (format_constraint(&ic, r), json!({}))
        }
    };
    let mut json = json;
    json["kind"] = json!(format!("{:?}", a.kind));
    json["seed"] = json!(a.seed);
    match &a.out {
        Some(path) => {
            write_file(path, &body)?;
            json["path"] = json!(path.display().to_string());
            Ok(Output::ok(format!("wrote {}\n", path.display()), json))
        }
        None => {
            json["content"] = json!(body);
            Ok(Output::ok(body, json))
        }
    }
}
