//! Trajectory-table ingestion: CSV parsing, smoothing and differentiation of
//! per-vehicle kinematics, and extraction of cut-in merge scenarios.

mod scenario;

pub use scenario::{
    extract_merge_scenarios, list_bundles, load_bundle, save_bundle, scenarios_from_table,
    MergeScenario, ScenarioMeta,
};

use std::collections::BTreeSet;
use thiserror::Error;

/// Sampling interval of the trajectory tables (10 Hz recordings).
pub const FRAME_DT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header mismatch: expected `{expected}`")]
    Header { expected: String },
    #[error("line {line}: duplicate sample for vehicle {vehicle} at frame {frame}")]
    DuplicateFrame {
        vehicle: u64,
        frame: u64,
        line: usize,
    },
    #[error("vehicle {vehicle}: frame gap between {prev} and {next}")]
    FrameGap { vehicle: u64, prev: u64, next: u64 },
    #[error("track of {len} samples is shorter than the smoothing window ({window})")]
    TooShort { len: usize, window: usize },
    #[error("smoothing window must be odd and at least 1, got {0}")]
    BadWindow(usize),
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("{0}: missing bundle file `{1}`")]
    MissingBundleFile(String, String),
}

/// One trajectory-table row. `local_x` is the lateral road coordinate,
/// `local_y` the longitudinal one; `preceding_id`/`following_id` are 0 when
/// there is no such neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub vehicle_id: u64,
    pub frame_id: u64,
    pub local_x: f64,
    pub local_y: f64,
    pub v_vel: f64,
    pub v_acc: f64,
    pub lane_id: i64,
    pub v_length: f64,
    pub preceding_id: u64,
    pub following_id: u64,
}

pub const TRAJECTORY_HEADER: &str =
    "vehicle_id,frame_id,local_x,local_y,v_vel,v_acc,lane_id,v_length,preceding_id,following_id";

/// Parses a trajectory table from CSV text. Rows are returned in file order;
/// no interpretation (smoothing, role assignment) happens here. Errors carry
/// 1-based line numbers.
pub fn parse_trajectory_str(text: &str) -> Result<Vec<RawRow>, IngestError> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| IngestError::Header {
            expected: TRAJECTORY_HEADER.into(),
        })?;
    let normalized: String = header
        .1
        .trim()
        .split(',')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",");
    if normalized != TRAJECTORY_HEADER {
        return Err(IngestError::Header {
            expected: TRAJECTORY_HEADER.into(),
        });
    }

    let mut rows = Vec::new();
    let mut seen: BTreeSet<(u64, u64)> = BTreeSet::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if cells.len() != 10 {
            return Err(IngestError::Parse {
                line,
                message: format!("expected 10 columns, got {}", cells.len()),
            });
        }
        let int = |cell: &str, name: &str| -> Result<u64, IngestError> {
            cell.parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{name}: `{cell}` is not a non-negative integer"),
            })
        };
        let sint = |cell: &str, name: &str| -> Result<i64, IngestError> {
            cell.parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{name}: `{cell}` is not an integer"),
            })
        };
        let num = |cell: &str, name: &str| -> Result<f64, IngestError> {
            let v: f64 = cell.parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{name}: `{cell}` is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(IngestError::Parse {
                    line,
                    message: format!("{name}: non-finite value"),
                })
            }
        };
        let row = RawRow {
            vehicle_id: int(cells[0], "vehicle_id")?,
            frame_id: int(cells[1], "frame_id")?,
            local_x: num(cells[2], "local_x")?,
            local_y: num(cells[3], "local_y")?,
            v_vel: num(cells[4], "v_vel")?,
            v_acc: num(cells[5], "v_acc")?,
            lane_id: sint(cells[6], "lane_id")?,
            v_length: num(cells[7], "v_length")?,
            preceding_id: int(cells[8], "preceding_id")?,
            following_id: int(cells[9], "following_id")?,
        };
        if !seen.insert((row.vehicle_id, row.frame_id)) {
            return Err(IngestError::DuplicateFrame {
                vehicle: row.vehicle_id,
                frame: row.frame_id,
                line,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// File-reading wrapper around [`parse_trajectory_str`].
pub fn parse_trajectory_csv(path: &std::path::Path) -> Result<Vec<RawRow>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trajectory_str(&text)
}

/// Smoothed, differentiated kinematics of one vehicle on the shared 10 Hz
/// grid. All series have the same length. `a_tot` is the magnitude of the
/// (lateral, longitudinal) acceleration vector and `jerk` its derivative;
/// `rec_v`/`rec_a` keep the recorded speed and acceleration columns for
/// cross-checking.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub id: u64,
    pub length: f64,
    pub t: Vec<f64>,
    pub x_lat: Vec<f64>,
    pub y_long: Vec<f64>,
    pub v_lat: Vec<f64>,
    pub v_long: Vec<f64>,
    pub a_long: Vec<f64>,
    pub a_tot: Vec<f64>,
    pub jerk: Vec<f64>,
    pub rec_v: Vec<f64>,
    pub rec_a: Vec<f64>,
    pub lane_id: Vec<i64>,
    pub preceding: Vec<u64>,
    pub following: Vec<u64>,
}

impl VehicleTrack {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        FRAME_DT
    }

    /// Index of the sample nearest to time `x`, clamped to the track.
    pub fn index_at(&self, x: f64) -> usize {
        if self.t.is_empty() {
            return 0;
        }
        let rel = (x - self.t[0]) / FRAME_DT;
        (rel.round().max(0.0) as usize).min(self.t.len() - 1)
    }

    /// Sub-track over sample indices `[lo, hi)`.
    pub(crate) fn slice(&self, lo: usize, hi: usize) -> VehicleTrack {
        VehicleTrack {
            id: self.id,
            length: self.length,
            t: self.t[lo..hi].to_vec(),
            x_lat: self.x_lat[lo..hi].to_vec(),
            y_long: self.y_long[lo..hi].to_vec(),
            v_lat: self.v_lat[lo..hi].to_vec(),
            v_long: self.v_long[lo..hi].to_vec(),
            a_long: self.a_long[lo..hi].to_vec(),
            a_tot: self.a_tot[lo..hi].to_vec(),
            jerk: self.jerk[lo..hi].to_vec(),
            rec_v: self.rec_v[lo..hi].to_vec(),
            rec_a: self.rec_a[lo..hi].to_vec(),
            lane_id: self.lane_id[lo..hi].to_vec(),
            preceding: self.preceding[lo..hi].to_vec(),
            following: self.following[lo..hi].to_vec(),
        }
    }
}

/// Centered moving average with symmetric shrink at the ends: sample `i`
/// averages over `[i-k, i+k]` with the largest `k` that fits, so constants
/// and straight lines pass through unchanged.
pub(crate) fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            let slice = &series[i - k..=i + k];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Central differences in the interior, one-sided at the two boundaries.
pub(crate) fn differentiate(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (series[1] - series[0]) / dt
                } else if i == n - 1 {
                    (series[n - 1] - series[n - 2]) / dt
                } else {
                    (series[i + 1] - series[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

/// Builds the derived kinematic series for one vehicle from its raw rows.
/// Rows may arrive in any order; frames must be gap-free. Positions are
/// smoothed before differencing (`smoothing_window` samples, odd).
pub fn build_track(rows: &[RawRow], smoothing_window: usize) -> Result<VehicleTrack, IngestError> {
    if smoothing_window == 0 || smoothing_window % 2 == 0 {
        return Err(IngestError::BadWindow(smoothing_window));
    }
    if rows.len() < smoothing_window || rows.len() < 2 {
        return Err(IngestError::TooShort {
            len: rows.len(),
            window: smoothing_window,
        });
    }
    let id = rows[0].vehicle_id;
    if rows.iter().any(|r| r.vehicle_id != id) {
        return Err(IngestError::BadScenario(
            "build_track got rows from more than one vehicle".into(),
        ));
    }
    let mut rows: Vec<RawRow> = rows.to_vec();
    rows.sort_by_key(|r| r.frame_id);
    for pair in rows.windows(2) {
        if pair[1].frame_id == pair[0].frame_id {
            return Err(IngestError::DuplicateFrame {
                vehicle: id,
                frame: pair[0].frame_id,
                line: 0,
            });
        }
        if pair[1].frame_id != pair[0].frame_id + 1 {
            return Err(IngestError::FrameGap {
                vehicle: id,
                prev: pair[0].frame_id,
                next: pair[1].frame_id,
            });
        }
    }

    let t: Vec<f64> = rows.iter().map(|r| r.frame_id as f64 * FRAME_DT).collect();
    let x_lat_s = smooth(&rows.iter().map(|r| r.local_x).collect::<Vec<_>>(), smoothing_window);
    let y_long_s = smooth(&rows.iter().map(|r| r.local_y).collect::<Vec<_>>(), smoothing_window);
    let v_lat = differentiate(&x_lat_s, FRAME_DT);
    let v_long = differentiate(&y_long_s, FRAME_DT);
    let a_lat = differentiate(&v_lat, FRAME_DT);
    let a_long = differentiate(&v_long, FRAME_DT);
    let a_tot: Vec<f64> = a_lat
        .iter()
        .zip(&a_long)
        .map(|(al, ao)| al.hypot(*ao))
        .collect();
    let jerk = differentiate(&a_tot, FRAME_DT);

    Ok(VehicleTrack {
        id,
        length: rows[0].v_length,
        t,
        x_lat: x_lat_s,
        y_long: y_long_s,
        v_lat,
        v_long,
        a_long,
        a_tot,
        jerk,
        rec_v: rows.iter().map(|r| r.v_vel).collect(),
        rec_a: rows.iter().map(|r| r.v_acc).collect(),
        lane_id: rows.iter().map(|r| r.lane_id).collect(),
        preceding: rows.iter().map(|r| r.preceding_id).collect(),
        following: rows.iter().map(|r| r.following_id).collect(),
    })
}
