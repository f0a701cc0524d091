use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use equidyn::equidist::{
    derivative_equidist_error, derivative_green_l1, equidist_error_periodic, equidist_error_preimages,
    mean_proximity_constant, mean_proximity_identity, parameter_derivative_error, EquidistParams, EtaRatio,
};
use equidyn::hyph::{hypothesis_h_statistic_with, HyphOptions};
use equidyn::potential::MuParams;
use equidyn::ratmap::{
    derivative_level_set, parameter_derivative_roots, periodic_divisor, preimage_measure, AtomicMeasure, RationalMap,
};
use equidyn::selberg::{
    myrberg_check, selberg_check, selberg_corpus, GridMask, MyrbergOptions, PlanarDomain, SelbergCase,
};
use equidyn::sphere::{builtin_test_functions, RandomStream, SpherePoint, TestFunction};

use crate::config::{parse_complex, ExperimentConfig, ExperimentKind, Target};
use crate::error::CliError;
use crate::report::{CsvRow, ExperimentReport, Outcome, TaskRecord};

/// Tolerance on divisor masses.
const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Task {
    n: usize,
    target: Option<Target>,
    eta: Option<f64>,
    case: Option<SelbergCase>,
}

pub fn test_function(name: &str) -> Result<TestFunction, CliError> {
    match builtin_test_functions().into_iter().find(|t| t.label == name) {
        Some(t) => Ok(t),
        None => Ok(TestFunction::by_name(name)?),
    }
}

fn equidist_params(c: &ExperimentConfig) -> EquidistParams {
    let base = MuParams::default();
    EquidistParams {
        mu: MuParams {
            samples: c.mu_samples,
            trajectory: (c.mu_samples as usize).div_ceil(base.walkers).max(1),
            ..base
        },
        method: c.method,
        proximity_samples: c.samples,
        budget: c.budget,
        c_f: c.c_f,
    }
}

/// `disk C R`, `annulus C RIN ROUT` or `mask STEM`.
pub fn parse_domain(spec: &str) -> Result<PlanarDomain, CliError> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| CliError::Config(format!("bad number {t:?} in domain {spec:?}")))
    };
    match parts.as_slice() {
        ["disk", c, r] => Ok(PlanarDomain::disk(parse_complex(c)?, num(r)?)?),
        ["annulus", c, a, b] => Ok(PlanarDomain::annulus(parse_complex(c)?, num(a)?, num(b)?)?),
        ["mask", stem] => Ok(PlanarDomain::Gridmask(GridMask::read(Path::new(stem))?)),
        _ => Err(CliError::Config(format!("bad domain {spec:?}"))),
    }
}

fn tasks(c: &ExperimentConfig) -> Result<Vec<Task>, CliError> {
    let plain = |n, target, eta| Task {
        n,
        target,
        eta,
        case: None,
    };
    Ok(match c.kind {
        ExperimentKind::Periodic => c.n_range.iter().map(|n| plain(n, None, None)).collect(),
        ExperimentKind::HypothesisH => c
            .n_range
            .iter()
            .flat_map(|n| c.etas.iter().map(move |&e| plain(n, None, Some(e))))
            .collect(),
        ExperimentKind::Selberg => {
            if c.domain.trim() == "corpus" {
                selberg_corpus()
                    .into_iter()
                    .enumerate()
                    .map(|(i, case)| Task {
                        case: Some(case),
                        ..plain(i + 1, None, None)
                    })
                    .collect()
            } else {
                let domain = parse_domain(&c.domain)?;
                let mut out = Vec::new();
                for (i, &r) in c.radii.iter().enumerate() {
                    for t in &c.targets {
                        let Target::Point(p) = t else { unreachable!("validated") };
                        let y = p
                            .to_complex()
                            .ok_or_else(|| CliError::Config("a pole must be finite".into()))?;
                        out.push(Task {
                            case: Some(SelbergCase {
                                label: format!("{} pole {t} radius {r}", c.domain),
                                domain: domain.clone(),
                                y,
                                r,
                            }),
                            ..plain(i + 1, Some(*t), None)
                        });
                    }
                }
                out
            }
        }
        _ => c
            .n_range
            .iter()
            .flat_map(|n| c.targets.iter().map(move |&t| plain(n, Some(t), None)))
            .collect(),
    })
}

fn first_ratio(r: &[EtaRatio]) -> (Option<f64>, Option<f64>) {
    r.first().map(|e| (Some(e.ratio), Some(e.eta))).unwrap_or((None, None))
}

fn finite_point(t: &Target) -> Result<Complex64, CliError> {
    match t {
        Target::Point(p) => p
            .to_complex()
            .ok_or_else(|| CliError::Config("target must be finite".into())),
        _ => Err(CliError::Config(format!("target `{t}` is not a point"))),
    }
}

fn run_task(c: &ExperimentConfig, f: &RationalMap, task: &Task, stream: &RandomStream) -> Result<(Outcome, CsvRow), CliError> {
    let n = task.n;
    let mut row = CsvRow::new(c.kind, n);
    let d = f.degree();
    let dn = (d as f64).powi(n as i32);
    let outcome = match c.kind {
        ExperimentKind::Proximity => {
            let rec = match task.target.expect("proximity tasks have targets") {
                Target::Identity => mean_proximity_identity(f, n, c.samples, &c.etas, stream)?,
                Target::Point(a) => mean_proximity_constant(f, a, n, c.samples, stream)?,
                Target::L1 => unreachable!("validated"),
            };
            row.value = Some(rec.value);
            row.stderr = Some(rec.stderr);
            row.ratio = rec.slope;
            row.pass = rec.pass;
            Outcome::Proximity(rec)
        }
        ExperimentKind::Equidist | ExperimentKind::Periodic => {
            let phi = test_function(&c.test_function)?;
            let params = equidist_params(c);
            let rec = match task.target {
                Some(Target::Point(a)) => equidist_error_preimages(f, a, n, &phi, &params, stream)?,
                _ => equidist_error_periodic(f, n, &phi, &params, stream)?,
            };
            row.value = Some(rec.lhs);
            row.stderr = Some(rec.stderr);
            row.bound = Some(rec.rhs_bound);
            row.ratio = (rec.rhs_bound > 0.0).then(|| rec.lhs / rec.rhs_bound);
            row.pass = rec.pass;
            Outcome::Equidist(rec)
        }
        ExperimentKind::Derivative => match task.target.expect("derivative tasks have targets") {
            Target::L1 => {
                let rec = derivative_green_l1(f, n, c.samples, &equidist_params(c).mu.escape, &c.etas, stream)?;
                row.value = Some(rec.l1_diff.value);
                row.stderr = Some(rec.l1_diff.stderr);
                (row.ratio, row.eta) = first_ratio(&rec.eta_ratios);
                row.pass = rec.l1_diff.value >= -3.0 * rec.l1_diff.stderr;
                Outcome::L1(rec)
            }
            t => {
                let phi = test_function(&c.test_function)?;
                let rec = derivative_equidist_error(f, finite_point(&t)?, n, &phi, &equidist_params(c), &c.etas, stream)?;
                row.value = Some(rec.lhs);
                row.stderr = Some(rec.stderr);
                (row.ratio, row.eta) = first_ratio(&rec.eta_ratios);
                row.pass = (rec.mass - (dn - 1.0)).abs() <= MASS_TOL * dn;
                Outcome::Rate(rec)
            }
        },
        ExperimentKind::Parameter => {
            let phi = test_function(&c.test_function)?;
            let a = finite_point(&task.target.expect("parameter tasks have targets"))?;
            let rec = parameter_derivative_error(d, a, n, &phi, &equidist_params(c), &c.etas, stream)?;
            row.value = Some(rec.rate.lhs);
            row.stderr = Some(rec.rate.stderr);
            (row.ratio, row.eta) = first_ratio(&rec.rate.eta_ratios);
            row.pass = (rec.rate.mass - (dn - 1.0)).abs() <= MASS_TOL * dn;
            Outcome::Parameter(rec)
        }
        ExperimentKind::Selberg => {
            let case = task.case.clone().expect("selberg tasks carry a case");
            let result = selberg_check(&case.domain, case.y, case.r)?;
            row.value = Some(result.lhs);
            row.stderr = Some(0.0);
            row.bound = Some(result.bound());
            row.ratio = (result.bound() > 0.0).then(|| result.lhs / result.bound());
            row.pass = result.pass;
            Outcome::Selberg { case, result }
        }
        ExperimentKind::HypothesisH => {
            let eta = task.eta.expect("cluster tasks carry η");
            let rep = hypothesis_h_statistic_with(
                f,
                n,
                eta,
                &HyphOptions {
                    budget: c.budget,
                    ..HyphOptions::default()
                },
            )?;
            row.value = Some(rep.max_cluster as f64);
            row.bound = Some(rep.allowance);
            row.ratio = Some(rep.max_cluster as f64 / rep.allowance);
            row.eta = Some(eta);
            row.pass = rep.pass;
            Outcome::Cluster(rep)
        }
        ExperimentKind::Myrberg => {
            let a = finite_point(&task.target.expect("myrberg tasks have targets"))?;
            let opts = MyrbergOptions {
                center: c.center,
                resolution: c.resolution,
                budget: c.budget,
                ..MyrbergOptions::default()
            };
            let rep = myrberg_check(f, a, c.s, n, c.probes, &opts)?;
            row.value = Some(rep.discrepancy);
            row.bound = Some(c.tolerance);
            row.ratio = Some(rep.discrepancy / c.tolerance);
            row.pass = rep.discrepancy < c.tolerance;
            Outcome::Myrberg(rep)
        }
    };
    Ok((outcome, row.finite()))
}

/// Validates the config, then runs every `(n, target)` task in parallel.
/// A failing task is recorded with its error and does not stop the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    config.validate()?;
    let f = config.rational_map()?;
    let started = Instant::now();
    let tasks = tasks(config)?;
    let records = tasks
        .par_iter()
        .enumerate()
        .map(|(index, task)| {
            let stream = RandomStream::with_substream(config.seed, index as u64);
            let (outcome, row) = run_task(config, &f, task, &stream).unwrap_or_else(|e| {
                (
                    Outcome::Failed { error: e.to_string() },
                    CsvRow {
                        eta: task.eta,
                        ..CsvRow::new(config.kind, task.n)
                    },
                )
            });
            TaskRecord {
                index,
                n: task.n,
                target: task.target.map(|t| t.to_string()),
                eta: task.eta,
                seed: config.seed,
                substream: index as u64,
                row,
                outcome,
            }
        })
        .collect();
    let versions = BTreeMap::from([
        ("equidyn".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("equidyn-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        versions,
    })
}

/// Reruns the config of a stored report; the caller compares the rows.
pub fn replay(report: &ExperimentReport) -> Result<ExperimentReport, CliError> {
    run_experiment(&report.config)
}

/// The atom cloud plotted for a report: the divisor at the largest order.
pub fn plot_divisor(c: &ExperimentConfig) -> Result<Option<(AtomicMeasure, String)>, CliError> {
    let f = c.rational_map()?;
    let n = c.n_range.end;
    let first_point = || {
        c.targets.iter().find_map(|t| match t {
            Target::Point(p) => Some(*p),
            _ => None,
        })
    };
    let out = match c.kind {
        ExperimentKind::Periodic | ExperimentKind::HypothesisH => {
            Some((periodic_divisor(&f, n, c.budget)?, format!("points of period dividing {n} for {f}")))
        }
        ExperimentKind::Equidist => match first_point() {
            Some(a) => Some((preimage_measure(&f, a, n, c.budget)?, format!("preimages of {a} under {f} iterated {n} times"))),
            None => None,
        },
        ExperimentKind::Derivative => match first_point() {
            Some(a) => Some((
                derivative_level_set(&f, a, n, c.budget)?,
                format!("derivative of {f} iterated {n} times equal to {a}"),
            )),
            None => None,
        },
        ExperimentKind::Parameter => match first_point().and_then(|p: SpherePoint| p.to_complex()) {
            Some(a) => Some((
                parameter_derivative_roots(f.degree(), a, n, c.budget)?,
                format!("parameters with derivative {a} at order {n}"),
            )),
            None => None,
        },
        _ => None,
    };
    Ok(out)
}
