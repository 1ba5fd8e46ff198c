use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qgs_core::experiments::Point;
use qgs_core::{Coupling, MetricGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spectra and spectral asymptotics of Schrödinger operators on metric graphs.
#[derive(Debug, Parser)]
#[command(name = "qgs", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for `random` point selectors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues with multiplicity.
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        target: Target,
    },
    /// Index-aligned gaps λ_n(σ) − λ_n(reference).
    Gaps {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Reference::SameV)]
        reference: Reference,
    },
    /// Running means of the gaps against their limit.
    MeanGaps {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Reference::SameV)]
        reference: Reference,
        #[arg(long, value_parser = positive)]
        tol: Option<f64>,
    },
    /// Cesàro means of |f_n(x)|² against 2/(L·deg_x).
    LocalWeyl {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[command(flatten)]
        points: PointArgs,
        #[arg(long, value_parser = positive)]
        tol: Option<f64>,
    },
    /// Eigenvalue count below Λ against (L/π)√Λ.
    Weyl {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "Lambda", value_parser = positive)]
        lambda: f64,
        #[arg(long, value_parser = positive, default_value_t = 0.05)]
        tol: f64,
    },
    /// Truncated heat kernel diagonal.
    Heat {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        points: PointArgs,
        /// Time; repeat for several.
        #[arg(long = "t", required = true, value_parser = positive)]
        times: Vec<f64>,
        #[arg(long, value_parser = positive, default_value_t = 1e-12)]
        trunc_tol: f64,
    },
    /// Heat kernel domination by the scaled free Kirchhoff kernel.
    Dominate {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        points: PointArgs,
        #[arg(long = "t", required = true, value_parser = positive)]
        times: Vec<f64>,
        /// Defaults to max_v max(−σ_v, 0).
        #[arg(long)]
        sigma_hat: Option<f64>,
        /// Defaults to a bound on the negative part of the potential.
        #[arg(long)]
        v_hat: Option<f64>,
        #[arg(long, value_parser = positive, default_value_t = 1e-12)]
        trunc_tol: f64,
        #[arg(long, value_parser = positive, default_value_t = qgs_core::experiments::DOMINATION_TOL)]
        tol: f64,
    },
    /// Closed-form spectrum of the equal-length 2-star.
    StarOracle {
        #[arg(long = "l", value_parser = positive)]
        l: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[arg(long, value_parser = positive, default_value_t = qgs_core::experiments::EVEN_GAP_TOL)]
        tol: f64,
    },
    /// Eigenfunction sup-norms against the certified bound.
    Supnorm {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
    },
    /// Cesàro means of vertex and point values.
    Cesaro {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[command(flatten)]
        points: OptionalPointArgs,
    },
    /// Coupling-path reconstruction of the gaps d_1..d_N.
    FhCheck {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long = "N", value_parser = count)]
        n: usize,
        #[arg(long, value_parser = count, default_value_t = qgs_core::experiments::DEFAULT_TAU_NODES)]
        tau_nodes: usize,
        #[arg(long, value_parser = positive, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Circumference, effective circumference and the mean-gap limit.
    Circumference {
        #[command(flatten)]
        graph: GraphArgs,
    },
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Graph description (JSON).
    #[arg(long)]
    pub graph: PathBuf,
    /// `VERTEX=VALUE` or a bare `VALUE` for every vertex; `VALUE` may be
    /// `dirichlet`. Applied in order, shadowing the file.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Vec<String>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Target {
    #[arg(long = "N", value_parser = count)]
    pub n: Option<usize>,
    #[arg(long = "Lambda")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// `vertex:NAME`, `edge:NAME:X`, or `random[:K]` for K seeded interior points.
    #[arg(long = "point", required = true)]
    pub selectors: Vec<String>,
}

#[derive(Debug, Args)]
pub struct OptionalPointArgs {
    /// `vertex:NAME`, `edge:NAME:X`, or `random[:K]` for K seeded interior points.
    #[arg(long = "point")]
    pub selectors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    /// Same potential, zero couplings.
    SameV,
    /// No potential, zero couplings.
    Free,
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected an integer ≥ 1, got `{s}`")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn coupling(s: &str) -> Result<Coupling> {
    if s.eq_ignore_ascii_case("dirichlet") {
        return Ok(Coupling::Dirichlet);
    }
    let v: f64 = s.parse().map_err(|_| anyhow!("invalid coupling `{s}`; expected a number or `dirichlet`"))?;
    if !v.is_finite() {
        bail!("coupling must be finite, got `{s}`");
    }
    Ok(Coupling::Delta(v))
}

impl GraphArgs {
    /// The graph file with every override applied.
    pub fn load(&self) -> Result<MetricGraph> {
        let text = std::fs::read_to_string(&self.graph)
            .with_context(|| format!("cannot read graph file `{}`", self.graph.display()))?;
        let g = qgs_core::parse_graph(&text).with_context(|| format!("invalid graph file `{}`", self.graph.display()))?;
        let mut sigma = g.sigma();
        for entry in &self.sigma {
            match entry.split_once('=') {
                Some((name, value)) => {
                    let v = g.vertex_by_name(name).ok_or_else(|| {
                        let known: Vec<&str> = g.vertices().iter().map(|v| v.name.as_str()).collect();
                        anyhow!("--sigma: no vertex `{name}`; the graph has {}", known.join(", "))
                    })?;
                    sigma[v.0] = coupling(value)?;
                }
                None => sigma.fill(coupling(entry)?),
            }
        }
        Ok(g.with_couplings(&sigma)?)
    }
}

/// Resolves point selectors against `g`; `random` draws from a ChaCha stream
/// seeded by `seed`, so repeated runs select the same points.
pub fn resolve_points(g: &MetricGraph, selectors: &[String], seed: u64) -> Result<Vec<(String, Point)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in selectors {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["vertex", name] => {
                let v = g.vertex_by_name(name).ok_or_else(|| anyhow!("--point {s}: no vertex `{name}`"))?;
                out.push((s.clone(), Point::Vertex(v)));
            }
            ["edge", name, x] => {
                let e = g.edge_by_name(name).ok_or_else(|| anyhow!("--point {s}: no edge `{name}`"))?;
                let x: f64 = x.parse().map_err(|_| anyhow!("--point {s}: invalid coordinate `{x}`"))?;
                let p = Point::Edge { edge: e, x }.normalized(g).with_context(|| format!("--point {s}"))?;
                out.push((s.clone(), p));
            }
            ["random"] | ["random", _] => {
                let k = match parts.get(1) {
                    Some(k) => count(k).map_err(|e| anyhow!("--point {s}: {e}"))?,
                    None => 1,
                };
                for _ in 0..k {
                    let e = g.edge_ids().nth(rng.random_range(0..g.edges().len())).expect("edge index in range");
                    let l = g.edge(e).length;
                    let x = rng.random_range(0.05 * l..0.95 * l);
                    out.push((format!("edge:{}:{}", g.edge(e).name, x), Point::Edge { edge: e, x }));
                }
            }
            _ => bail!("--point `{s}`: expected `vertex:NAME`, `edge:NAME:X` or `random[:K]`"),
        }
    }
    Ok(out)
}
