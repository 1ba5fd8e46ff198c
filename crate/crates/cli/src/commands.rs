use anyhow::Result;
use qgs_core::experiments::{
    self as exp, graph_hash, DominationCheck, ExperimentReport, FeynmanHellmann, HeatDiagonal, Point, ReferenceKind,
    Verdict,
};
use qgs_core::{eigenvalues_with, MetricGraph, SolverConfig, SpectrumTarget};
use rayon::prelude::*;
use serde_json::json;

use crate::args::{resolve_points, Command, Reference, RunConfig};
use crate::output::{f, Outcome, Table};

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.seed;
    match &cfg.command {
        Command::Spectrum { graph, target } => {
            let g = graph.load()?;
            let t = match (target.n, target.lambda) {
                (Some(n), _) => SpectrumTarget::Count(n),
                (_, Some(l)) => SpectrumTarget::Cutoff(l),
                _ => unreachable!("clap requires one target"),
            };
            spectrum(&g, t)
        }
        Command::Gaps { graph, n, reference } => gaps(&graph.load()?, *n, *reference),
        Command::MeanGaps { graph, n, reference, tol } => {
            let g = graph.load()?;
            let mut r = match reference {
                Reference::SameV => exp::mean_gap(&g, &g.sigma(), *n)?,
                Reference::Free => exp::mean_gap_hat(&g, &g.sigma(), *n)?,
            };
            if let Some(tol) = tol {
                r = r.with_tolerance(*tol);
            }
            Ok(single_report(r))
        }
        Command::LocalWeyl { graph, n, points, tol } => {
            let g = graph.load()?;
            let points = resolve_points(&g, &points.selectors, seed)?;
            let reports = points
                .par_iter()
                .map(|(_, p)| {
                    let r = exp::local_weyl(&g, &g.sigma(), *p, *n)?;
                    Ok(match tol {
                        Some(t) => r.with_tolerance(*t),
                        None => r,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(many_reports(&points, reports))
        }
        Command::Weyl { graph, lambda, tol } => {
            let g = graph.load()?;
            let w = exp::weyl_counting(&g, &g.sigma(), *lambda)?;
            let mut table = Table::new(&["lambda", "count", "weyl", "ratio"]);
            table.push(vec![f(w.lambda), w.count.to_string(), f(w.weyl), f(w.ratio)]);
            let verdict = Verdict::from_bool((w.ratio - 1.0).abs() <= *tol);
            Ok(Outcome {
                table,
                json: json!({ "weyl": w, "tolerance": tol, "verdict": verdict }),
                verdict: Some(verdict),
                summary: format!("N(Λ) = {} against (L/π)√Λ = {:.3}, ratio {:.4}", w.count, w.weyl, w.ratio),
            })
        }
        Command::Heat { graph, points, times, trunc_tol } => {
            let g = graph.load()?;
            let points = resolve_points(&g, &points.selectors, seed)?;
            heat(&g, &points, times, *trunc_tol)
        }
        Command::Dominate { graph, points, times, sigma_hat, v_hat, trunc_tol, tol } => {
            let g = graph.load()?;
            let points = resolve_points(&g, &points.selectors, seed)?;
            let sigma_hat = sigma_hat.unwrap_or_else(|| {
                g.vertex_ids().filter_map(|v| g.coupling(v).sigma()).map(|s| (-s).max(0.0)).fold(0.0, f64::max)
            });
            let v_hat = v_hat.unwrap_or_else(|| g.potential_negative_sup());
            let only: Vec<Point> = points.iter().map(|(_, p)| *p).collect();
            let check = exp::heat_domination_check(&g, &g.sigma(), &only, times, sigma_hat, v_hat, *trunc_tol)?;
            Ok(dominate(&points, check, sigma_hat, v_hat, *tol))
        }
        Command::StarOracle { l, sigma, n, tol } => {
            let s = exp::star_oracle(*l, *sigma, *n)?;
            let mut table = Table::new(&["n", "lambda"]);
            for (i, v) in s.merged.iter().enumerate() {
                table.push(vec![(i + 1).to_string(), f(*v)]);
            }
            let verdict = Verdict::from_bool(s.even_gap_defect <= *tol);
            Ok(Outcome {
                table,
                summary: format!("even-index gap defect {:.2e}", s.even_gap_defect),
                json: json!({ "oracle": s, "tolerance": tol, "verdict": verdict }),
                verdict: Some(verdict),
            })
        }
        Command::Supnorm { graph, n } => {
            let g = graph.load()?;
            let s = exp::sup_norm_scan(&g, &g.sigma(), *n)?;
            let mut table = Table::new(&["n", "sup_norm", "running_max", "dirichlet", "bound"]);
            for i in 0..s.sup_norms.len() {
                table.push(vec![
                    (i + 1).to_string(),
                    f(s.sup_norms[i]),
                    f(s.running_max[i].1),
                    f(s.dirichlet[i]),
                    f(s.bounds[i]),
                ]);
            }
            Ok(Outcome {
                table,
                summary: format!(
                    "max sup-norm {:.4}, certified bound respected: {}",
                    s.running_max.last().map_or(0.0, |r| r.1),
                    s.bound_respected
                ),
                verdict: Some(s.verdict),
                json: json!({ "graph_hash": graph_hash(&g), "scan": s }),
            })
        }
        Command::Cesaro { graph, n, points } => {
            let g = graph.load()?;
            let points = resolve_points(&g, &points.selectors, seed)?;
            let only: Vec<Point> = points.iter().map(|(_, p)| *p).collect();
            let c = exp::cesaro_bound_scan(&g, &g.sigma(), *n, &only)?;
            let mut table = Table::report_header();
            table.push_report("vertices", &c.vertices);
            for ((label, _), r) in points.iter().zip(&c.points) {
                table.push_report(label, r);
            }
            Ok(Outcome {
                table,
                summary: format!(
                    "vertex sum mean {:.5} against {:.5}",
                    c.vertices.final_value().unwrap_or(f64::NAN),
                    c.vertices.theoretical_limit
                ),
                verdict: Some(c.verdict),
                json: serde_json::to_value(&c)?,
            })
        }
        Command::FhCheck { graph, n, tau_nodes, tol } => {
            let g = graph.load()?;
            let rows = (1..=*n)
                .into_par_iter()
                .map(|k| exp::feynman_hellmann_check(&g, &g.sigma(), k, *tau_nodes))
                .collect::<Result<Vec<FeynmanHellmann>, _>>()?;
            Ok(fh(&rows, *tol))
        }
        Command::Circumference { graph } => circumference(&graph.load()?),
    }
}

fn spectrum(g: &MetricGraph, target: SpectrumTarget) -> Result<Outcome> {
    let r = eigenvalues_with(g, target, &SolverConfig::values_only())?;
    let values = match target {
        SpectrumTarget::Count(n) => r.first(n),
        SpectrumTarget::Cutoff(l) => r.values().into_iter().filter(|&v| v <= l).collect(),
    };
    let mut table = Table::new(&["n", "lambda"]);
    for (i, v) in values.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), f(*v)]);
    }
    let eigenvalues: Vec<_> = r.eigenvalues.iter().filter(|e| values.last().is_some_and(|&l| e.lambda <= l)).collect();
    Ok(Outcome {
        table,
        summary: format!("{} eigenvalues", values.len()),
        verdict: None,
        json: json!({ "graph_hash": graph_hash(g), "values": values, "eigenvalues": eigenvalues }),
    })
}

fn gaps(g: &MetricGraph, n: usize, reference: Reference) -> Result<Outcome> {
    let kind = match reference {
        Reference::SameV => ReferenceKind::SameV,
        Reference::Free => ReferenceKind::FreeNeumann,
    };
    let seq = exp::gap_sequence(g, &g.sigma(), n, kind)?;
    let mut table = Table::new(&["n", "lambda_sigma", "lambda_reference", "d"]);
    for e in &seq.entries {
        table.push(vec![e.n.to_string(), f(e.lambda_sigma), f(e.lambda_reference), f(e.d)]);
    }
    let max = seq.gaps().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(Outcome {
        table,
        summary: format!("{} gaps, max |d_n| = {max:.6}", seq.entries.len()),
        verdict: None,
        json: json!({ "graph_hash": graph_hash(g), "gaps": seq }),
    })
}

fn single_report(r: ExperimentReport) -> Outcome {
    let mut table = Table::report_header();
    table.push_report(&r.name, &r);
    Outcome {
        table,
        summary: format!(
            "{} at N = {}: {:.6} against {:.6}",
            r.name,
            r.final_n().unwrap_or(0),
            r.final_value().unwrap_or(f64::NAN),
            r.theoretical_limit
        ),
        verdict: Some(r.verdict),
        json: serde_json::to_value(&r).expect("reports serialize"),
    }
}

fn many_reports(points: &[(String, Point)], reports: Vec<ExperimentReport>) -> Outcome {
    let mut table = Table::report_header();
    let mut parts = Vec::new();
    for ((label, _), r) in points.iter().zip(&reports) {
        table.push_report(label, r);
        parts.push(format!("{label} {:.5}/{:.5}", r.final_value().unwrap_or(f64::NAN), r.theoretical_limit));
    }
    let verdict = Verdict::from_bool(reports.iter().all(|r| r.verdict.passed()));
    Outcome {
        table,
        summary: parts.join(", "),
        verdict: Some(verdict),
        json: json!({ "reports": reports, "verdict": verdict }),
    }
}

fn heat(g: &MetricGraph, points: &[(String, Point)], times: &[f64], trunc_tol: f64) -> Result<Outcome> {
    let jobs: Vec<(&str, Point, f64)> =
        points.iter().flat_map(|(l, p)| times.iter().map(move |&t| (l.as_str(), *p, t))).collect();
    let diags = jobs
        .par_iter()
        .map(|&(_, p, t)| exp::heat_kernel_diag(g, &g.sigma(), p, t, trunc_tol))
        .collect::<Result<Vec<HeatDiagonal>, _>>()?;
    let mut table = Table::new(&["point", "t", "value", "asymptote", "terms", "cutoff", "tail_bound"]);
    for ((label, _, _), d) in jobs.iter().zip(&diags) {
        table.push(vec![
            label.to_string(),
            f(d.t),
            f(d.value),
            f(d.asymptote),
            d.terms.to_string(),
            f(d.cutoff),
            f(d.tail_bound),
        ]);
    }
    Ok(Outcome {
        table,
        summary: format!("{} heat kernel samples", diags.len()),
        verdict: None,
        json: json!({ "graph_hash": graph_hash(g), "samples": diags }),
    })
}

fn label_of(points: &[(String, Point)], p: Point) -> String {
    points.iter().find(|(_, q)| *q == p).map_or_else(|| format!("{p:?}"), |(l, _)| l.clone())
}

fn dominate(points: &[(String, Point)], check: DominationCheck, sigma_hat: f64, v_hat: f64, tol: f64) -> Outcome {
    let mut table = Table::new(&["point", "t", "lhs", "rhs", "violation"]);
    for s in &check.samples {
        table.push(vec![label_of(points, s.point), f(s.t), f(s.lhs), f(s.rhs), f(s.violation)]);
    }
    let verdict = Verdict::from_bool(check.max_violation <= tol);
    Outcome {
        table,
        summary: format!("max violation {:.3e} (σ̂ = {sigma_hat}, V̂ = {v_hat})", check.max_violation),
        verdict: Some(verdict),
        json: json!({ "sigma_hat": sigma_hat, "v_hat": v_hat, "tolerance": tol, "check": check, "verdict": verdict }),
    }
}

fn fh(rows: &[FeynmanHellmann], tol: f64) -> Outcome {
    let mut table = Table::new(&["n", "reconstructed", "direct", "defect", "min_relative_gap"]);
    for r in rows {
        table.push(vec![r.n.to_string(), f(r.reconstructed), f(r.direct), f(r.defect), f(r.min_relative_gap)]);
    }
    let worst = rows.iter().map(|r| r.defect.abs()).fold(0.0, f64::max);
    let verdict = Verdict::from_bool(worst <= tol);
    Outcome {
        table,
        summary: format!("max defect {worst:.3e} over n ≤ {}", rows.len()),
        verdict: Some(verdict),
        json: json!({ "rows": rows, "tolerance": tol, "verdict": verdict }),
    }
}

fn circumference(g: &MetricGraph) -> Result<Outcome> {
    let c = g.circumference();
    let (c_sigma, limit) = if g.has_dirichlet() {
        (None, None)
    } else {
        let cs = g.effective_circumference()?;
        (Some(cs), Some(exp::mean_gap_limit(g)?))
    };
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["total_length".into(), f(g.total_length())]);
    table.push(vec!["circumference".into(), f(c)]);
    if let (Some(cs), Some(l)) = (c_sigma, limit) {
        table.push(vec!["effective_circumference".into(), f(cs)]);
        table.push(vec!["mean_gap_limit".into(), f(l)]);
    }
    let summary = match c_sigma {
        Some(cs) => format!("C = {c:.6}, C_σ = {cs:.6}"),
        None => format!("C = {c:.6}; C_σ undefined with Dirichlet vertices"),
    };
    Ok(Outcome {
        table,
        summary,
        verdict: None,
        json: json!({
            "graph_hash": graph_hash(g),
            "total_length": g.total_length(),
            "circumference": c,
            "effective_circumference": c_sigma,
            "mean_gap_limit": limit,
        }),
    })
}

/// Extra guidance for errors whose message alone does not say what to try.
pub fn hint(err: &anyhow::Error) -> Option<&'static str> {
    use qgs_core::SpectralError;
    let spectral = err.chain().find_map(|e| e.downcast_ref::<SpectralError>())?;
    match spectral {
        SpectralError::CountMismatch { .. } => Some(
            "the secular scan and the finite element count disagree; eigenvalues may be too close to resolve. \
             Perturb an edge length slightly or lower --N/--Lambda",
        ),
        SpectralError::Ode(qgs_core::OdeError::Overflow { .. }) => {
            Some("a deep negative potential or coupling makes the edge solutions overflow; shorten the edge or reduce |V|")
        }
        SpectralError::Truncation { .. } => Some("the heat series needs too many terms; use a larger --t or --trunc-tol"),
        _ => None,
    }
}
