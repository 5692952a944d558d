//! Cut-in merge scenarios: role assignment (FV / LC / LV), window clipping,
//! and on-disk scenario bundles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{build_track, parse_trajectory_str, IngestError, RawRow, VehicleTrack, FRAME_DT};

/// Half-width of the window kept around the lane-change frame, in seconds.
const WINDOW_HALF_S: f64 = 15.0;
/// How many frames past the lane change the follower link may appear.
const LINK_SEARCH_FRAMES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioMeta {
    pub name: String,
    pub source: String,
    pub fv_id: u64,
    pub lc_id: u64,
    pub lv_id: u64,
    pub source_lane: i64,
    pub target_lane: i64,
}

/// One merge event: the lane-changing vehicle LC cuts in between the leader
/// LV and the follower FV, making LC the follower's new leader. All three
/// tracks are clipped to one shared time window.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeScenario {
    pub fv: VehicleTrack,
    pub lc: VehicleTrack,
    pub lv: VehicleTrack,
    /// Index (into the shared window) of LC's lane-boundary crossing, when
    /// the window contains one.
    pub lane_change_frame: Option<usize>,
    pub meta: ScenarioMeta,
}

impl MergeScenario {
    pub fn new(
        fv: VehicleTrack,
        lc: VehicleTrack,
        lv: VehicleTrack,
        lane_change_frame: Option<usize>,
        meta: ScenarioMeta,
    ) -> Result<Self, IngestError> {
        let n = fv.len();
        if n == 0 {
            return Err(IngestError::BadScenario("empty tracks".into()));
        }
        if lc.len() != n || lv.len() != n {
            return Err(IngestError::BadScenario(format!(
                "track lengths differ: fv {}, lc {}, lv {}",
                n,
                lc.len(),
                lv.len()
            )));
        }
        let aligned = fv
            .t
            .iter()
            .zip(&lc.t)
            .zip(&lv.t)
            .all(|((a, b), c)| (a - b).abs() < 1e-9 && (a - c).abs() < 1e-9);
        if !aligned {
            return Err(IngestError::BadScenario(
                "tracks are not on a shared time grid".into(),
            ));
        }
        if let Some(f) = lane_change_frame {
            if f >= n {
                return Err(IngestError::BadScenario(format!(
                    "lane_change_frame {f} outside the {n}-sample window"
                )));
            }
        }
        Ok(MergeScenario {
            fv,
            lc,
            lv,
            lane_change_frame,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.fv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fv.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.fv.t
    }

    pub fn dt(&self) -> f64 {
        FRAME_DT
    }

    pub fn lane_change_time(&self) -> Option<f64> {
        self.lane_change_frame.map(|f| self.fv.t[f])
    }

    /// Bumper-reference gap between LC and FV along the road, per sample.
    pub fn spacing_fv_lc(&self) -> Vec<f64> {
        self.lc
            .y_long
            .iter()
            .zip(&self.fv.y_long)
            .map(|(l, f)| l - f)
            .collect()
    }
}

/// Scans all tracks for lane changes and assembles one [`MergeScenario`] per
/// resolvable cut-in. Returns the scenarios plus one human-readable reason
/// per skipped candidate. Deterministic: tracks are visited in id order.
pub fn extract_merge_scenarios(
    tracks: &[VehicleTrack],
    source: &str,
) -> (Vec<MergeScenario>, Vec<String>) {
    let by_id: BTreeMap<u64, &VehicleTrack> = tracks.iter().map(|tr| (tr.id, tr)).collect();
    let mut scenarios = Vec::new();
    let mut skipped = Vec::new();

    for (&lc_id, &lc) in &by_id {
        let Some(change) = (1..lc.len()).find(|&i| lc.lane_id[i] != lc.lane_id[i - 1]) else {
            continue;
        };
        let source_lane = lc.lane_id[change - 1];
        let target_lane = lc.lane_id[change];
        let mut skip = |reason: String| {
            skipped.push(format!("vehicle {lc_id} lane change at index {change}: {reason}"));
        };

        let lv_id = lc.preceding[change - 1];
        if lv_id == 0 {
            skip("no leader ahead of LC before the change".into());
            continue;
        }
        let Some(&lv) = by_id.get(&lv_id) else {
            skip(format!("leader {lv_id} has no track"));
            continue;
        };

        // The follower is whoever lists LC as its leader in the target lane
        // right after the cut-in; LC's own follower link is tried first.
        let hi = (change + LINK_SEARCH_FRAMES).min(lc.len() - 1);
        let mut fv_found = None;
        let mut candidates: Vec<u64> = Vec::new();
        let hint = lc.following[change];
        if hint != 0 {
            candidates.push(hint);
        }
        candidates.extend(by_id.keys().copied().filter(|id| *id != lc_id));
        'cand: for cand_id in candidates {
            let Some(&cand) = by_id.get(&cand_id) else {
                continue;
            };
            for idx in change..=hi {
                let tq = lc.t[idx];
                let j = cand.index_at(tq);
                if (cand.t[j] - tq).abs() < 1e-9
                    && cand.lane_id[j] == target_lane
                    && cand.preceding[j] == lc_id
                {
                    fv_found = Some(cand);
                    break 'cand;
                }
            }
        }
        let Some(fv) = fv_found else {
            skip("no vehicle lists LC as its new leader in the target lane".into());
            continue;
        };
        if fv.id == lv_id {
            skip("follower and leader resolve to the same vehicle".into());
            continue;
        }

        // Shared window: +/- WINDOW_HALF_S around the change, clipped to the
        // overlap of the three tracks.
        let t_change = lc.t[change];
        let half = (WINDOW_HALF_S / FRAME_DT).round() as i64;
        let mut lo_t = t_change - half as f64 * FRAME_DT;
        let mut hi_t = t_change + half as f64 * FRAME_DT;
        for tr in [lc, fv, lv] {
            lo_t = lo_t.max(tr.t[0]);
            hi_t = hi_t.min(*tr.t.last().unwrap());
        }
        if hi_t - lo_t < FRAME_DT {
            skip("tracks share less than two samples around the change".into());
            continue;
        }
        let cut = |tr: &VehicleTrack| {
            let lo = tr.index_at(lo_t);
            let hi = tr.index_at(hi_t);
            tr.slice(lo, hi + 1)
        };
        let fv_w = cut(fv);
        let lc_w = cut(lc);
        let lv_w = cut(lv);
        let lane_change_frame = if t_change >= lo_t - 1e-9 && t_change <= hi_t + 1e-9 {
            Some(lc_w.index_at(t_change))
        } else {
            None
        };

        let meta = ScenarioMeta {
            name: format!("lc{lc_id}_f{}", lc.t[change].round() as i64 * 10),
            source: source.to_string(),
            fv_id: fv.id,
            lc_id,
            lv_id,
            source_lane,
            target_lane,
        };
        match MergeScenario::new(fv_w, lc_w, lv_w, lane_change_frame, meta) {
            Ok(s) => scenarios.push(s),
            Err(e) => skip(e.to_string()),
        }
    }
    (scenarios, skipped)
}

/// Convenience: parse a trajectory table, build per-vehicle tracks, extract
/// scenarios. Vehicles too short to smooth are skipped with a reason.
pub fn scenarios_from_table(
    text: &str,
    source: &str,
    smoothing_window: usize,
) -> Result<(Vec<MergeScenario>, Vec<String>), IngestError> {
    let rows = parse_trajectory_str(text)?;
    let mut grouped: BTreeMap<u64, Vec<RawRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(row.vehicle_id).or_default().push(row);
    }
    let mut tracks = Vec::new();
    let mut skipped = Vec::new();
    for (id, rows) in grouped {
        match build_track(&rows, smoothing_window) {
            Ok(tr) => tracks.push(tr),
            Err(e @ IngestError::TooShort { .. }) => {
                skipped.push(format!("vehicle {id}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let (scenarios, mut more) = extract_merge_scenarios(&tracks, source);
    skipped.append(&mut more);
    Ok((scenarios, skipped))
}

const TRACK_HEADER: &str =
    "t,x_lat,y_long,v_lat,v_long,a_long,a_tot,jerk,rec_v,rec_a,lane_id,preceding_id,following_id";

fn track_to_csv(track: &VehicleTrack) -> String {
    let mut out = String::from(TRACK_HEADER);
    out.push('\n');
    for i in 0..track.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            track.t[i],
            track.x_lat[i],
            track.y_long[i],
            track.v_lat[i],
            track.v_long[i],
            track.a_long[i],
            track.a_tot[i],
            track.jerk[i],
            track.rec_v[i],
            track.rec_a[i],
            track.lane_id[i],
            track.preceding[i],
            track.following[i],
        );
    }
    out
}

fn track_from_csv(text: &str, id: u64, length: f64, file: &str) -> Result<VehicleTrack, IngestError> {
    let mut track = VehicleTrack {
        id,
        length,
        t: Vec::new(),
        x_lat: Vec::new(),
        y_long: Vec::new(),
        v_lat: Vec::new(),
        v_long: Vec::new(),
        a_long: Vec::new(),
        a_tot: Vec::new(),
        jerk: Vec::new(),
        rec_v: Vec::new(),
        rec_a: Vec::new(),
        lane_id: Vec::new(),
        preceding: Vec::new(),
        following: Vec::new(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACK_HEADER => {}
        _ => {
            return Err(IngestError::Parse {
                line: 1,
                message: format!("{file}: expected header `{TRACK_HEADER}`"),
            })
        }
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.trim().split(',').collect();
        if cells.len() != 13 {
            return Err(IngestError::Parse {
                line,
                message: format!("{file}: expected 13 columns, got {}", cells.len()),
            });
        }
        let num = |i: usize| -> Result<f64, IngestError> {
            cells[i].parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{file}: column {}: `{}` is not a number", i + 1, cells[i]),
            })
        };
        track.t.push(num(0)?);
        track.x_lat.push(num(1)?);
        track.y_long.push(num(2)?);
        track.v_lat.push(num(3)?);
        track.v_long.push(num(4)?);
        track.a_long.push(num(5)?);
        track.a_tot.push(num(6)?);
        track.jerk.push(num(7)?);
        track.rec_v.push(num(8)?);
        track.rec_a.push(num(9)?);
        track
            .lane_id
            .push(cells[10].parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{file}: lane_id `{}` is not an integer", cells[10]),
            })?);
        track
            .preceding
            .push(cells[11].parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{file}: preceding_id `{}` is not an integer", cells[11]),
            })?);
        track
            .following
            .push(cells[12].parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("{file}: following_id `{}` is not an integer", cells[12]),
            })?);
    }
    Ok(track)
}

/// Writes a scenario as a directory bundle: `fv.csv`, `lc.csv`, `lv.csv`
/// plus a `meta.txt` of `key value` lines. Output is byte-stable.
pub fn save_bundle(scenario: &MergeScenario, dir: &Path) -> Result<(), IngestError> {
    let io_err = |source: std::io::Error| IngestError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut meta = String::new();
    let _ = writeln!(meta, "version 1");
    let _ = writeln!(meta, "name {}", scenario.meta.name);
    let _ = writeln!(meta, "source {}", scenario.meta.source);
    let _ = writeln!(meta, "fv_id {}", scenario.meta.fv_id);
    let _ = writeln!(meta, "lc_id {}", scenario.meta.lc_id);
    let _ = writeln!(meta, "lv_id {}", scenario.meta.lv_id);
    let _ = writeln!(meta, "source_lane {}", scenario.meta.source_lane);
    let _ = writeln!(meta, "target_lane {}", scenario.meta.target_lane);
    let _ = writeln!(meta, "fv_length {}", scenario.fv.length);
    let _ = writeln!(meta, "lc_length {}", scenario.lc.length);
    let _ = writeln!(meta, "lv_length {}", scenario.lv.length);
    if let Some(f) = scenario.lane_change_frame {
        let _ = writeln!(meta, "lane_change_index {f}");
    }
    std::fs::write(dir.join("meta.txt"), meta).map_err(io_err)?;
    for (name, track) in [
        ("fv.csv", &scenario.fv),
        ("lc.csv", &scenario.lc),
        ("lv.csv", &scenario.lv),
    ] {
        std::fs::write(dir.join(name), track_to_csv(track)).map_err(io_err)?;
    }
    Ok(())
}

/// Reads a bundle written by [`save_bundle`].
pub fn load_bundle(dir: &Path) -> Result<MergeScenario, IngestError> {
    let read = |name: &str| -> Result<String, IngestError> {
        let path = dir.join(name);
        if !path.exists() {
            return Err(IngestError::MissingBundleFile(
                dir.display().to_string(),
                name.to_string(),
            ));
        }
        std::fs::read_to_string(&path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let meta_text = read("meta.txt")?;
    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
    for (idx, raw) in meta_text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(char::is_whitespace).ok_or(IngestError::Parse {
            line: idx + 1,
            message: format!("meta.txt: expected `key value`, got `{line}`"),
        })?;
        kv.insert(key, value.trim());
    }
    let field = |key: &str| -> Result<&str, IngestError> {
        kv.get(key).copied().ok_or_else(|| IngestError::Parse {
            line: 0,
            message: format!("meta.txt: missing key `{key}`"),
        })
    };
    if field("version")? != "1" {
        return Err(IngestError::Parse {
            line: 1,
            message: "meta.txt: unsupported version".into(),
        });
    }
    let parse_u64 = |key: &str| -> Result<u64, IngestError> {
        field(key)?.parse().map_err(|_| IngestError::Parse {
            line: 0,
            message: format!("meta.txt: `{key}` is not an integer"),
        })
    };
    let parse_i64 = |key: &str| -> Result<i64, IngestError> {
        field(key)?.parse().map_err(|_| IngestError::Parse {
            line: 0,
            message: format!("meta.txt: `{key}` is not an integer"),
        })
    };
    let parse_f64 = |key: &str| -> Result<f64, IngestError> {
        field(key)?.parse().map_err(|_| IngestError::Parse {
            line: 0,
            message: format!("meta.txt: `{key}` is not a number"),
        })
    };
    let meta = ScenarioMeta {
        name: field("name")?.to_string(),
        source: field("source")?.to_string(),
        fv_id: parse_u64("fv_id")?,
        lc_id: parse_u64("lc_id")?,
        lv_id: parse_u64("lv_id")?,
        source_lane: parse_i64("source_lane")?,
        target_lane: parse_i64("target_lane")?,
    };
    let lane_change_frame = match kv.get("lane_change_index") {
        Some(v) => Some(v.parse().map_err(|_| IngestError::Parse {
            line: 0,
            message: "meta.txt: `lane_change_index` is not an integer".into(),
        })?),
        None => None,
    };
    let fv = track_from_csv(&read("fv.csv")?, meta.fv_id, parse_f64("fv_length")?, "fv.csv")?;
    let lc = track_from_csv(&read("lc.csv")?, meta.lc_id, parse_f64("lc_length")?, "lc.csv")?;
    let lv = track_from_csv(&read("lv.csv")?, meta.lv_id, parse_f64("lv_length")?, "lv.csv")?;
    MergeScenario::new(fv, lc, lv, lane_change_frame, meta)
}

/// Bundle directories directly under `dir` (those containing `meta.txt`),
/// sorted by path.
pub fn list_bundles(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let io_err = |source: std::io::Error| IngestError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_dir() && path.join("meta.txt").is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
