//! File outputs for finished runs: one CSV per table, a JSON summary, the
//! topology edge list and the optional per-slot schedule trace.
//!
//! Every file starts with a manifest comment line (seed, policy, sizes,
//! config hash, version) so any output can be traced back to the exact run
//! that produced it. Rendering is pure string building; writes go through a
//! temp file and rename.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::RunSpec;
use crate::engine::{RunOutcome, RunTrace};
use crate::metrics::{report_tables, RunReport};
use crate::scalar::Float;
use crate::topology;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("summary serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Run provenance embedded in every output file.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub policy: String,
    pub nodes: usize,
    pub slots: u64,
    pub channels: usize,
    pub schedules: String,
    pub config: String,
    pub version: String,
}

impl Manifest {
    pub fn for_spec<F: Float>(spec: &RunSpec<F>) -> Self {
        Self {
            seed: spec.seed,
            policy: spec.policy.to_string(),
            nodes: spec.nodes,
            slots: spec.slots,
            channels: spec.channels,
            schedules: spec
                .num_schedules
                .map(|m| m.to_string())
                .unwrap_or_else(|| "auto".to_string()),
            config: spec.config_hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn header_line(&self) -> String {
        format!(
            "# seed={} policy={} nodes={} slots={} channels={} schedules={} config={} version={}\n",
            self.seed,
            self.policy,
            self.nodes,
            self.slots,
            self.channels,
            self.schedules,
            self.config,
            self.version
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

pub fn render_flows_csv(manifest: &Manifest, report: &RunReport, gateways: &[u32]) -> String {
    let mut out = manifest.header_line();
    out.push_str("flow,source,generated,delivered,backlog");
    for gw in gateways {
        let _ = write!(out, ",delivered_gw{gw},sent_gw{gw},split_gw{gw}");
    }
    out.push_str(",mean_delay_slots,throughput_mbps\n");
    for row in &report.flows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            row.flow, row.source, row.generated, row.delivered, row.backlog
        );
        for g in 0..gateways.len() {
            let split = row.split.as_ref().map(|s| s[g]);
            let _ = write!(
                out,
                ",{},{},{}",
                row.delivered_per_gw[g],
                row.sent_per_gw[g],
                fmt_opt(split)
            );
        }
        let _ = writeln!(
            out,
            ",{},{:.6}",
            fmt_opt(row.mean_delay_slots),
            row.throughput_mbps
        );
    }
    out
}

pub fn render_gateways_csv(manifest: &Manifest, report: &RunReport) -> String {
    let mut out = manifest.header_line();
    out.push_str("gateway,flow,sent,received,delivery_pct\n");
    for row in &report.gateways {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.gateway,
            row.flow,
            row.sent,
            row.received,
            fmt_opt(row.pct)
        );
    }
    out
}

pub fn render_jfi_csv(manifest: &Manifest, report: &RunReport) -> String {
    let mut out = manifest.header_line();
    out.push_str("metric,jfi\n");
    for row in &report.jfi {
        let _ = writeln!(out, "{},{}", row.metric, fmt_opt(row.value));
    }
    out
}

pub fn render_aggregate_csv(manifest: &Manifest, report: &RunReport) -> String {
    let mut out = manifest.header_line();
    out.push_str(
        "aggregate_throughput_mbps,total_generated,total_received,total_backlog,mean_delay_slots,relayed_through_gateway\n",
    );
    let a = &report.aggregate;
    let _ = writeln!(
        out,
        "{:.6},{},{},{},{},{}",
        a.throughput_mbps,
        a.total_generated,
        a.total_received,
        a.total_backlog,
        fmt_opt(a.mean_delay_slots),
        a.relayed_through_gateway
    );
    out
}

/// Per-slot schedule trace: one row per scheduled link per slot.
pub fn render_trace_csv(manifest: &Manifest, trace: &RunTrace) -> String {
    let mut out = manifest.header_line();
    out.push_str("slot,m,channel,i,j,rate_mbps,power_mw,commodity,weight,pi\n");
    for rec in &trace.slots {
        for sched in &rec.schedules {
            for link in &sched.links {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.6},{:.9e},{},{:.6},{}",
                    rec.slot,
                    sched.m,
                    sched.channel,
                    link.i,
                    link.j,
                    link.rate_mbps,
                    link.power_mw,
                    link.commodity,
                    link.weight,
                    sched.pi
                );
            }
        }
    }
    out
}

pub fn render_summary_json<F: Float>(
    manifest: &Manifest,
    spec: &RunSpec<F>,
    topo: &crate::model::Topology<F>,
    report: &RunReport,
) -> Result<String, ReportError> {
    let degrees: Vec<usize> = topo.node_ids().map(|id| topo.degree(id)).collect();
    let value = serde_json::json!({
        "manifest": manifest,
        "label": spec.run_label(),
        "topology": {
            "nodes": topo.num_nodes(),
            "edges": topo.num_links() / 2,
            "gateways": topo.gateways().iter().map(|g| g.0).collect::<Vec<_>>(),
            // The pruning bounds only the maximum degree; the achieved
            // minimum is reported, not enforced.
            "min_degree": degrees.iter().min().copied().unwrap_or(0),
            "max_degree": degrees.iter().max().copied().unwrap_or(0),
        },
        "report": report,
    });
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_err)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents.as_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

/// All files produced by one run.
#[derive(Debug)]
pub struct RunFiles {
    pub flows_csv: PathBuf,
    pub gateways_csv: PathBuf,
    pub jfi_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub summary_json: PathBuf,
    pub topology_txt: PathBuf,
    pub trace_csv: Option<PathBuf>,
}

/// Writes every run output into `spec.out_dir`, returning the paths, and the
/// report the tables were built from.
pub fn write_run_files<F: Float>(
    spec: &RunSpec<F>,
    outcome: &RunOutcome<F>,
) -> Result<(RunFiles, RunReport), ReportError> {
    let manifest = Manifest::for_spec(spec);
    let report = report_tables(&outcome.ledger, &outcome.flows, &outcome.topology, &spec.phy);
    let label = spec.run_label();
    let dir = &spec.out_dir;
    let gateway_ids: Vec<u32> = outcome.topology.gateways().iter().map(|g| g.0).collect();

    let flows_csv = dir.join(format!("flows_{label}.csv"));
    write_atomic(&flows_csv, &render_flows_csv(&manifest, &report, &gateway_ids))?;

    let gateways_csv = dir.join(format!("gateways_{label}.csv"));
    write_atomic(&gateways_csv, &render_gateways_csv(&manifest, &report))?;

    let jfi_csv = dir.join(format!("jfi_{label}.csv"));
    write_atomic(&jfi_csv, &render_jfi_csv(&manifest, &report))?;

    let aggregate_csv = dir.join(format!("aggregate_{label}.csv"));
    write_atomic(&aggregate_csv, &render_aggregate_csv(&manifest, &report))?;

    let summary_json = dir.join(format!("summary_{label}.json"));
    write_atomic(
        &summary_json,
        &render_summary_json(&manifest, spec, &outcome.topology, &report)?,
    )?;

    let topology_txt = dir.join(format!("topology_{label}.txt"));
    let mut topo_text = manifest.header_line();
    topo_text.push_str(&topology::write_edge_list(&outcome.topology));
    write_atomic(&topology_txt, &topo_text)?;

    let trace_csv = match &outcome.trace {
        Some(trace) => {
            let path = dir.join(format!("trace_{label}.csv"));
            write_atomic(&path, &render_trace_csv(&manifest, trace))?;
            Some(path)
        }
        None => None,
    };

    Ok((
        RunFiles {
            flows_csv,
            gateways_csv,
            jfi_csv,
            aggregate_csv,
            summary_json,
            topology_txt,
            trace_csv,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FlowMode, RunSpec};
    use crate::engine;
    use crate::model::NodeId;
    use crate::topology::GatewayMode;

    fn small_spec(dir: &Path) -> RunSpec<f64> {
        let mut spec: RunSpec<f64> = RunSpec::default_experiment();
        spec.slots = 60;
        spec.seed = 3;
        spec.trace = true;
        spec.out_dir = dir.to_path_buf();
        spec.gateway_mode = GatewayMode::Explicit(vec![NodeId(1), NodeId(10)]);
        spec.flow_mode = FlowMode::FirstNonGateway { count: 8 };
        spec
    }

    #[test]
    fn run_files_carry_the_manifest_and_reproduce_bytewise() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = small_spec(tmp.path());
        let outcome = engine::run(&spec).unwrap();
        let (files, _) = write_run_files(&spec, &outcome).unwrap();

        let first = fs::read_to_string(&files.flows_csv).unwrap();
        assert!(first.starts_with("# seed=3 policy=W nodes=10"));
        assert!(first.contains("config="));

        // Second execution of the same manifest: byte-identical outputs.
        let outcome2 = engine::run(&spec).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut spec2 = spec.clone();
        spec2.out_dir = dir2.path().to_path_buf();
        let (files2, _) = write_run_files(&spec2, &outcome2).unwrap();
        for (a, b) in [
            (&files.flows_csv, &files2.flows_csv),
            (&files.gateways_csv, &files2.gateways_csv),
            (&files.jfi_csv, &files2.jfi_csv),
            (&files.aggregate_csv, &files2.aggregate_csv),
            (&files.summary_json, &files2.summary_json),
            (&files.topology_txt, &files2.topology_txt),
        ] {
            assert_eq!(
                fs::read_to_string(a).unwrap(),
                fs::read_to_string(b).unwrap()
            );
        }
        let ta = fs::read_to_string(files.trace_csv.as_ref().unwrap()).unwrap();
        let tb = fs::read_to_string(files2.trace_csv.as_ref().unwrap()).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn csv_uses_na_for_undefined_cells() {
        let tmp = tempfile::tempdir().unwrap();
        let mut spec = small_spec(tmp.path());
        spec.slots = 1; // nothing delivered yet
        let outcome = engine::run(&spec).unwrap();
        let (files, report) = write_run_files(&spec, &outcome).unwrap();
        assert!(report.flows.iter().all(|r| r.delivered == 0));
        let text = fs::read_to_string(&files.jfi_csv).unwrap();
        assert!(text.contains("throughput,n/a"));
    }
}
