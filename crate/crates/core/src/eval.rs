//! Fill-in ratio and benchmark reports.
//!
//! Factor nonzeros are measured on the symbolic Cholesky pattern of the
//! symmetrized matrix: `nnz(L + U - I) = nnz_sym(A) + 2 |F|`, so
//! `FIR = 2 |F| / nnz_sym(A)`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::orderings::{min_degree_order, natural_order, random_order};
use crate::policy::{load_checkpoint, PolicyValueNet};
use crate::sparsity::{load_matrix_market, Ordering, SparsityPattern};
use crate::symbolic::fill_count;
use crate::trainer::greedy_order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Natural,
    Random,
    MinDegree,
    Gpo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Natural => "natural",
            Method::Random => "random",
            Method::MinDegree => "mindeg",
            Method::Gpo => "gpo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "natural" => Ok(Method::Natural),
            "random" => Ok(Method::Random),
            "mindeg" => Ok(Method::MinDegree),
            "gpo" => Ok(Method::Gpo),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected natural, random, mindeg or gpo)"
            ))),
        }
    }
}

/// `2 |F| / nnz_sym(A)` for the given ordering.
pub fn fill_in_ratio(pattern: &SparsityPattern, ordering: &Ordering) -> Result<f64> {
    let fill = fill_count(pattern, ordering)?;
    Ok(fir_from_fill(pattern, fill))
}

fn fir_from_fill(pattern: &SparsityPattern, fill: usize) -> f64 {
    (2 * fill) as f64 / pattern.nnz_sym() as f64
}

/// Ordering for `method`. `rng` feeds the random baseline only; `net` is
/// required for [`Method::Gpo`].
pub fn compute_ordering(
    method: Method,
    pattern: &SparsityPattern,
    net: Option<&PolicyValueNet>,
    rng: &mut ChaCha8Rng,
) -> Result<Ordering> {
    match method {
        Method::Natural => Ok(natural_order(pattern)),
        Method::Random => Ok(random_order(pattern, rng)),
        Method::MinDegree => Ok(min_degree_order(pattern)),
        Method::Gpo => {
            let net = net.ok_or_else(|| Error::InvalidArgument("method gpo requires a model".into()))?;
            greedy_order(net, pattern)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellStats {
    pub n: usize,
    pub nnz: usize,
    pub fill: usize,
    /// `nnz(L + U - I)`.
    pub nnz_factor: usize,
    pub fir: f64,
}

impl CellStats {
    pub fn measure(pattern: &SparsityPattern, ordering: &Ordering) -> Result<Self> {
        let fill = fill_count(pattern, ordering)?;
        Ok(Self {
            n: pattern.n(),
            nnz: pattern.nnz_sym(),
            fill,
            nnz_factor: pattern.nnz_sym() + 2 * fill,
            fir: fir_from_fill(pattern, fill),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub matrix: String,
    pub method: Method,
    pub outcome: std::result::Result<CellStats, String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.outcome.is_err())
    }

    pub fn successes(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_ok()).count()
    }

    /// Mean FIR and number of successful cells per method, in first-seen order.
    pub fn mean_fir(&self) -> Vec<(Method, f64, usize)> {
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        methods
            .into_iter()
            .map(|m| {
                let firs: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == m)
                    .filter_map(|r| r.outcome.as_ref().ok().map(|s| s.fir))
                    .collect();
                let mean = if firs.is_empty() {
                    f64::NAN
                } else {
                    firs.iter().sum::<f64>() / firs.len() as f64
                };
                (m, mean, firs.len())
            })
            .collect()
    }

    /// CSV with header `matrix,method,n,nnz,fill,fir`, followed by a
    /// `# summary` block of per-method means and an `# errors` block.
    /// Failed cells appear as rows with empty numeric fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["matrix", "method", "n", "nnz", "fill", "fir"])
            .map_err(csv_err)?;
        for r in &self.rows {
            match &r.outcome {
                Ok(s) => w.write_record([
                    r.matrix.clone(),
                    r.method.to_string(),
                    s.n.to_string(),
                    s.nnz.to_string(),
                    s.fill.to_string(),
                    s.fir.to_string(),
                ]),
                Err(_) => w.write_record([r.matrix.as_str(), r.method.name(), "", "", "", ""]),
            }
            .map_err(csv_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        inner.write_all(b"\n")?;
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(inner);
        w.write_record(["# summary"]).map_err(csv_err)?;
        w.write_record(["method", "mean_fir", "matrices"])
            .map_err(csv_err)?;
        for (m, mean, count) in self.mean_fir() {
            w.write_record([m.to_string(), mean.to_string(), count.to_string()])
                .map_err(csv_err)?;
        }
        if self.has_errors() {
            w.write_record(["# errors"]).map_err(csv_err)?;
            w.write_record(["matrix", "method", "message"]).map_err(csv_err)?;
            for r in &self.rows {
                if let Err(msg) = &r.outcome {
                    w.write_record([r.matrix.as_str(), r.method.name(), msg.as_str()])
                        .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates every matrix × method cell. Cells run in parallel; each matrix
/// gets its own random stream derived from `seed`, so results do not depend
/// on scheduling. Failures are recorded per cell.
pub fn run_benchmark(
    matrices: &[PathBuf],
    methods: &[Method],
    model: Option<&Path>,
    seed: u64,
) -> EvalReport {
    let mut matrices: Vec<PathBuf> = matrices.to_vec();
    matrices.sort();
    matrices.dedup();

    let net: Option<std::result::Result<PolicyValueNet, String>> =
        methods.contains(&Method::Gpo).then(|| match model {
            Some(path) => load_checkpoint(path, None).map_err(|e| format!("{}: {e}", path.display())),
            None => Err("method gpo requires --model".to_string()),
        });

    let loaded: Vec<std::result::Result<SparsityPattern, String>> = matrices
        .par_iter()
        .map(|path| load_matrix_market(path).map_err(|e| e.to_string()))
        .collect();

    let cells: Vec<(usize, Method)> = (0..matrices.len())
        .flat_map(|i| methods.iter().map(move |&m| (i, m)))
        .collect();

    let rows = cells
        .par_iter()
        .map(|&(i, method)| {
            let outcome = loaded[i].clone().and_then(|pattern| {
                let net = match (&net, method) {
                    (Some(Err(msg)), Method::Gpo) => return Err(msg.clone()),
                    (Some(Ok(net)), _) => Some(net),
                    _ => None,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                compute_ordering(method, &pattern, net, &mut rng)
                    .and_then(|ord| CellStats::measure(&pattern, &ord))
                    .map_err(|e| e.to_string())
            });
            EvalRow {
                matrix: matrices[i].display().to_string(),
                method,
                outcome,
            }
        })
        .collect();
    EvalReport { rows }
}
