//! Output files: trace CSV, summary and manifest JSON, PPC CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qtomo_core::model::layout_for_qubits;
use qtomo_core::posterior::PPC_LEVELS;
use qtomo_core::{PpcResult, QuantitySummary, Qubits, StateSummary, Trace};

use crate::CliError;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s.into_bytes()
}

/// Trace as CSV: `chain`, `draw`, then one column per variable.
pub fn trace_csv(trace: &Trace) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(trace.names().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    let columns: Vec<Vec<&[f64]>> =
        trace.names().iter().map(|n| trace.chain_slices(n).expect("name from trace")).collect();
    let mut record = Vec::with_capacity(header.len());
    for c in 0..trace.chains() {
        for d in 0..trace.draws() {
            record.clear();
            record.push(c.to_string());
            record.push(d.to_string());
            record.extend(columns.iter().map(|col| format!("{:?}", col[c][d])));
            w.write_record(&record).expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a trace written by [`trace_csv`]. Latent columns are recognised by
/// the layout of the problem size, which is inferred from the column names.
pub fn read_trace_csv(path: &Path) -> Result<(Trace, Qubits), CliError> {
    let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "chain" || header[1] != "draw" {
        return Err(bad("expected leading `chain,draw` columns".into()));
    }
    let names = header[2..].to_vec();
    let qubits = if names.iter().any(|n| n == "t15") { Qubits::Two } else { Qubits::One };
    let latent = layout_for_qubits(qubits).names();
    if names.len() < latent.len() || names[..latent.len()] != latent[..] {
        return Err(bad("latent columns do not match a known layout".into()));
    }
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("row {}: missing column {k}", i + 1)));
        let chain = field(0)?.parse().map_err(|e| bad(format!("row {}: chain: {e}", i + 1)))?;
        let draw = field(1)?.parse().map_err(|e| bad(format!("row {}: draw: {e}", i + 1)))?;
        let vals = (2..header.len())
            .map(|k| field(k)?.parse::<f64>().map_err(|e| bad(format!("row {}: {}: {e}", i + 1, header[k]))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((chain, draw, vals));
    }
    let chains = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    if chains == 0 || rows.len() % chains != 0 {
        return Err(bad("rows do not split evenly into chains".into()));
    }
    let draws = rows.len() / chains;
    let mut data = vec![0.0; names.len() * rows.len()];
    for (i, (c, d, vals)) in rows.iter().enumerate() {
        if (*c, *d) != (i / draws, i % draws) {
            return Err(bad(format!("row {} is out of order (chain {c}, draw {d})", i + 1)));
        }
        for (v, &x) in vals.iter().enumerate() {
            data[(v * chains + c) * draws + d] = x;
        }
    }
    let trace = Trace::from_parts(names, latent.len(), chains, draws, data).map_err(|e| bad(e.to_string()))?;
    Ok((trace, qubits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityJson {
    pub name: String,
    pub bme: f64,
    pub hdi: [f64; 2],
    pub rhat: f64,
    pub ess: f64,
}

impl From<&QuantitySummary> for QuantityJson {
    fn from(q: &QuantitySummary) -> Self {
        QuantityJson { name: q.name.clone(), bme: q.bme, hdi: [q.hdi.0, q.hdi.1], rhat: q.rhat, ess: q.ess }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainJson {
    pub step_size: f64,
    pub mean_accept: f64,
    pub mean_tree_depth: f64,
    pub divergences: usize,
    pub max_depth_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub qubits: usize,
    pub hdi_prob: f64,
    pub quantities: Vec<QuantityJson>,
    pub latent: Vec<QuantityJson>,
    pub bme_matrix: MatrixJson,
    pub max_rhat: f64,
    pub min_ess: f64,
    /// Unknown when the summary is rebuilt from a trace file.
    pub divergences: Option<usize>,
    pub chains: Vec<ChainJson>,
    pub warnings: Vec<String>,
}

impl SummaryJson {
    pub fn new(s: &StateSummary, trace: &Trace, with_stats: bool, warnings: Vec<String>) -> Self {
        let m = &s.bme_matrix;
        let n = m.rows();
        let chains = if with_stats {
            trace
                .stats()
                .iter()
                .map(|c| ChainJson {
                    step_size: c.step_size,
                    mean_accept: c.mean_accept,
                    mean_tree_depth: c.mean_tree_depth,
                    divergences: c.divergences,
                    max_depth_hits: c.max_depth_hits,
                })
                .collect()
        } else {
            Vec::new()
        };
        SummaryJson {
            qubits: match s.qubits {
                Qubits::One => 1,
                Qubits::Two => 2,
            },
            hdi_prob: s.hdi_prob,
            quantities: s.quantities.iter().map(Into::into).collect(),
            latent: s.latent.iter().map(Into::into).collect(),
            bme_matrix: MatrixJson {
                re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
                im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
            },
            max_rhat: s.max_rhat,
            min_ess: s.min_ess,
            divergences: with_stats.then_some(s.divergences),
            chains,
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerJson {
    pub kind: String,
    pub chains: usize,
    pub draws: usize,
    pub tune: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub max_rhat: f64,
    pub min_ess: f64,
    pub divergences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedJson {
    pub angle_offsets: std::collections::BTreeMap<String, f64>,
    pub crosstalk: Vec<[f64; 4]>,
    pub mean_counts: Vec<f64>,
}

/// Provenance of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: String,
    pub config_digest: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized: Option<RealizedJson>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

pub fn manifest_path_for(trace: &Path) -> PathBuf {
    trace.parent().unwrap_or(Path::new(".")).join("manifest.json")
}

pub fn ppc_csv(p: &PpcResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "observed".to_string()];
    header.extend(PPC_LEVELS.iter().map(|l| format!("q{:02}", (l * 100.0).round() as u32)));
    header.push("tail_prob".into());
    w.write_record(&header).expect("in-memory write");
    for (j, label) in p.labels.iter().enumerate() {
        let mut rec = vec![label.clone(), format!("{:?}", p.observed[j])];
        rec.extend(p.quantiles[j].iter().map(|q| format!("{q:?}")));
        rec.push(format!("{:?}", p.tail_prob[j]));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
