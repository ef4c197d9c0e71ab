use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One projection of one convolution layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsvdEvent {
    /// Index of the layer in the model.
    pub layer: usize,
    /// Iteration at which the projection happened.
    pub t: u64,
    /// Projection counter, `t / m`.
    pub z: u64,
    /// Selected rank.
    pub k: usize,
    /// `min(rows, cols)` of the matrix view.
    pub full_rank: usize,
    /// Normalized energy of each retained singular value.
    pub energy_ratios: Vec<f64>,
    /// `||W||_F` just before projection.
    pub fro_norm: f64,
    /// `m * G / ||W||_F`, with `G` the largest per-step update norm since the
    /// previous event. Zero at `z = 0`.
    pub bound_stat: f64,
    /// `bound_stat < sqrt(e)`; vacuously true at `z = 0`.
    pub bound_holds: bool,
    pub discarded_energy: f64,
    /// `G` itself.
    pub window_max: f64,
    /// Sum of per-step update norms since the previous event.
    pub window_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CsvRow {
    layer: usize,
    t: u64,
    z: u64,
    k: usize,
    fro_norm: f64,
    bound_stat: f64,
    bound_holds: bool,
}

/// Append-only log of projection events, ordered by `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankTrajectory {
    pub events: Vec<TsvdEvent>,
}

impl RankTrajectory {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn push(&mut self, event: TsvdEvent) {
        debug_assert!(self.events.last().is_none_or(|e| e.t <= event.t));
        self.events.push(event);
    }

    /// Distinct layer indices in first-seen order.
    pub fn layers(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.layer) {
                out.push(e.layer);
            }
        }
        out
    }

    pub fn for_layer(&self, layer: usize) -> Vec<&TsvdEvent> {
        self.events.iter().filter(|e| e.layer == layer).collect()
    }

    /// Rank sequence `k(z)` of one layer.
    pub fn ranks(&self, layer: usize) -> Vec<usize> {
        self.for_layer(layer).iter().map(|e| e.k).collect()
    }

    /// One row per event: `layer,t,z,k,fro_norm,bound_stat,bound_holds`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ctx = || format!("writing trajectory {}", path.display());
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(ctx(), e))?;
        for e in &self.events {
            w.serialize(CsvRow {
                layer: e.layer,
                t: e.t,
                z: e.z,
                k: e.k,
                fro_norm: e.fro_norm,
                bound_stat: e.bound_stat,
                bound_holds: e.bound_holds,
            })
            .map_err(|e| csv_err(ctx(), e))?;
        }
        w.flush().map_err(|e| Error::io(ctx(), e))
    }

    /// Full events, one JSON object per line.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ctx = || format!("writing trajectory {}", path.display());
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(ctx(), e))?);
        for e in &self.events {
            let line = serde_json::to_string(e).map_err(|e| Error::Serde(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(ctx(), e))?;
        }
        w.flush().map_err(|e| Error::io(ctx(), e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ctx = || format!("reading trajectory {}", path.display());
        let file = File::open(path).map_err(|e| Error::io(ctx(), e))?;
        let mut events = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(ctx(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: TsvdEvent = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), n + 1)))?;
            events.push(event);
        }
        Ok(Self { events })
    }
}

fn csv_err(context: String, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { context, source },
        other => Error::Serde(format!("{context}: {other:?}")),
    }
}

/// `ER(i) = sigma_i^2 / sum_j sigma_j^2` for the first `k` values.
pub fn energy_ratios(sigma: &[f64], k: usize) -> Result<Vec<f64>> {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::Precondition("energy ratios of an all-zero spectrum".into()));
    }
    if sigma.windows(2).any(|w| w[0] < w[1]) || sigma.iter().any(|&s| s < 0.0) {
        return Err(Error::Precondition("singular values must be non-negative and non-increasing".into()));
    }
    Ok(sigma.iter().take(k).map(|s| s * s / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_examples() {
        assert_eq!(energy_ratios(&[1.0; 4], 4).unwrap(), vec![0.25; 4]);
        let er = energy_ratios(&[3.0, 2.0, 1.0], 3).unwrap();
        assert_eq!(er, vec![9.0 / 14.0, 4.0 / 14.0, 1.0 / 14.0]);
        let partial = energy_ratios(&[3.0, 2.0, 1.0], 2).unwrap();
        assert!(partial.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn er_rejects_degenerate_spectra() {
        assert!(energy_ratios(&[0.0, 0.0], 2).is_err());
        assert!(energy_ratios(&[1.0, 2.0], 2).is_err());
    }
}
