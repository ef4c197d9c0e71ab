use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::TRAJECTORY_JSONL;
use crate::error::{Error, Result};
use crate::trp::RankTrajectory;

pub const REPORT_DIR: &str = "report";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSummary {
    pub layer: usize,
    pub full_rank: usize,
    pub initial_rank: usize,
    pub final_rank: usize,
    pub events: usize,
    /// Fraction of events after the first with `bound_holds`; `None` with a single event.
    pub bound_holds_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    /// Per-layer `(z, i, er)` heatmap tables.
    pub heatmaps: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: Vec<LayerSummary>,
}

/// Turns `run_dir/trajectory.jsonl` into plot-ready tables under `run_dir/report/`.
pub fn cmd_report(run_dir: &Path) -> Result<ReportBundle> {
    let jsonl = run_dir.join(TRAJECTORY_JSONL);
    if !jsonl.exists() {
        return Err(Error::io(
            format!("no trajectory in {}", run_dir.display()),
            std::io::Error::new(std::io::ErrorKind::NotFound, "trajectory.jsonl missing"),
        ));
    }
    let traj = RankTrajectory::read_jsonl(&jsonl)?;
    let out = run_dir.join(REPORT_DIR);
    fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;

    let mut heatmaps = Vec::new();
    let mut summary = Vec::new();
    for layer in traj.layers() {
        let events = traj.for_layer(layer);
        let path = out.join(format!("er_layer{layer}.csv"));
        let mut text = String::from("z,i,er\n");
        for e in &events {
            for (i, er) in e.energy_ratios.iter().enumerate() {
                writeln!(text, "{},{},{}", e.z, i, er).expect("write to string");
            }
        }
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        heatmaps.push(path);

        let later = &events[1.min(events.len())..];
        summary.push(LayerSummary {
            layer,
            full_rank: events[0].full_rank,
            initial_rank: events[0].k,
            final_rank: events[events.len() - 1].k,
            events: events.len(),
            bound_holds_fraction: (!later.is_empty()).then(|| {
                later.iter().filter(|e| e.bound_holds).count() as f64 / later.len() as f64
            }),
        });
    }

    let mut table = String::new();
    writeln!(
        table,
        "{:>5} {:>9} {:>12} {:>10} {:>7} {:>12}",
        "layer", "full_rank", "initial_rank", "final_rank", "events", "bound_holds"
    )
    .expect("write to string");
    for s in &summary {
        let frac = s
            .bound_holds_fraction
            .map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
        writeln!(
            table,
            "{:>5} {:>9} {:>12} {:>10} {:>7} {:>12}",
            s.layer, s.full_rank, s.initial_rank, s.final_rank, s.events, frac
        )
        .expect("write to string");
    }
    let summary_path = out.join(SUMMARY_FILE);
    fs::write(&summary_path, table)
        .map_err(|e| Error::io(format!("writing {}", summary_path.display()), e))?;

    Ok(ReportBundle {
        heatmaps,
        summary_path,
        summary,
    })
}
