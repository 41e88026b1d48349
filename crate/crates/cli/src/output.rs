//! Series, epoch manifest and snapshot writers.

use std::io::Write;

use crystal_flow::energy::window_clips;
use crystal_flow::flow::{RestartRecord, Trajectory};
use crystal_flow::AdmissibleCurve;
use serde::Serialize;

use crate::CliError;

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        "inf".into()
    }
}

/// One CSV row per sample, padded to the largest segment count over all epochs.
pub fn write_series<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    if traj.samples.is_empty() {
        return Err(CliError::Run("trajectory has no samples".into()));
    }
    let width = traj.samples.iter().map(|s| s.h.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "epoch".into(), "n".into()];
    header.extend((1..=width).map(|i| format!("h_{i}")));
    header.extend((1..=width).map(|i| format!("L_{i}")));
    header.extend(["energy".into(), "max_rate".into()]);
    w.write_record(&header).map_err(io)?;
    for s in &traj.samples {
        let mut row = vec![cell(s.t), s.epoch.to_string(), s.h.len().to_string()];
        let pad = |vals: &[f64], row: &mut Vec<String>| {
            row.extend(vals.iter().map(|&x| cell(x)));
            row.extend(std::iter::repeat_n(String::new(), width - vals.len()));
        };
        pad(&s.h, &mut row);
        pad(&s.lengths, &mut row);
        row.push(s.energy.map(cell).unwrap_or_default());
        row.push(cell(s.max_rate()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Serialize)]
pub struct EpochEntry<'a> {
    pub epoch: usize,
    pub start_time: f64,
    pub segments: usize,
    pub facets: Vec<usize>,
    pub transitions: Vec<i8>,
    /// The restart that opened this epoch.
    pub restart: Option<&'a RestartRecord>,
}

pub fn epoch_manifest(traj: &Trajectory) -> Vec<EpochEntry<'_>> {
    traj.epochs
        .iter()
        .enumerate()
        .map(|(k, e)| EpochEntry {
            epoch: k,
            start_time: e.start_time,
            segments: e.reference.len(),
            facets: e.reference.facets(),
            transitions: e.reference.transitions(),
            restart: k.checked_sub(1).and_then(|r| traj.restarts.get(r)),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct SegmentInfo {
    pub facet: usize,
    pub transition: i8,
    pub length: f64,
    pub curvature: f64,
}

#[derive(Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub epoch: usize,
    pub closed: bool,
    /// Vertices in order; half-lines are clipped to the energy window, closed curves are not repeated.
    pub points: Vec<[f64; 2]>,
    pub segments: Vec<SegmentInfo>,
}

pub fn snapshot(curve: &AdmissibleCurve, t: f64, epoch: usize, window_radius: f64) -> Snapshot {
    let params = crystal_flow::FlowParams::new(1.0, window_radius).ok();
    let clips = params.and_then(|p| window_clips(curve, &p).ok().flatten());
    let mut pts = curve.vertices();
    match (curve.rays(), clips) {
        (Some([first, last]), Some([c0, c1])) => {
            pts.insert(0, pts[0] + c0 * first);
            pts.push(pts[pts.len() - 1] + c1 * last);
        }
        (Some(_), None) => pts = curve.polyline(window_radius),
        _ => {}
    }
    let segments = curve
        .segments()
        .iter()
        .enumerate()
        .map(|(i, s)| SegmentInfo {
            facet: s.facet,
            transition: s.transition,
            length: s.length,
            curvature: curve.crystalline_curvature(i).unwrap_or(0.0),
        })
        .collect();
    Snapshot {
        t,
        epoch,
        closed: curve.is_closed(),
        points: pts.iter().map(|p| [p.x, p.y]).collect(),
        segments,
    }
}

/// Snapshots at the last sample at or before each requested time.
pub fn snapshots(traj: &Trajectory, times: &[f64], window_radius: f64) -> Result<Vec<Snapshot>, CliError> {
    let t_end = traj.samples.last().map(|s| s.t).unwrap_or(0.0);
    times
        .iter()
        .map(|&t| {
            if !(0.0..=t_end).contains(&t) {
                return Err(CliError::TimeOutOfRange { t, end: t_end });
            }
            let k = traj.sample_index_at(t).unwrap_or(0);
            let curve = traj.curve_at(k).map_err(|e| CliError::Run(e.to_string()))?;
            let s = &traj.samples[k];
            Ok(snapshot(&curve, s.t, s.epoch, window_radius))
        })
        .collect()
}
