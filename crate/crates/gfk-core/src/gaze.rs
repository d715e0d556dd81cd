//! Eye-tracker session logs: parsing, frequency estimation and the mapping
//! from screen-space gaze into scan voxel coordinates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LungMask, ScanVolume};

/// One eye-tracker sample: absolute screen pixels at session time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub sx: f64,
    pub sy: f64,
}

/// Axial-view rectangle in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRect {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl WinRect {
    /// Half-open containment: the right and bottom edges are outside.
    pub fn contains(&self, sx: f64, sy: f64) -> bool {
        sx >= self.left && sx < self.left + self.width && sy >= self.top && sy < self.top + self.height
    }
}

/// Viewer state needed to map screen gaze into the scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewportState {
    pub t: f64,
    /// Axial slice under display.
    pub z: i64,
    /// Screen pixels per scan voxel.
    pub zoom: f64,
    /// Scan-voxel offset of the viewport's top-left corner.
    pub pan: (f64, f64),
    pub win: WinRect,
    /// Monitor mm per screen pixel.
    pub px_pitch: f64,
    /// True while the reader is placing an annotation; gaze is discarded.
    pub annotating: bool,
}

/// Gaze sample mapped into integer scan voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGazePoint {
    pub t: f64,
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// A gaze point together with the viewport state that produced it
/// (the state index feeds zoom-dependent kernel grouping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub point: VoxelGazePoint,
    pub state_idx: usize,
}

/// Output of [`parse_session`].
#[derive(Debug, Clone)]
pub struct ParsedSession {
    pub samples: Vec<GazeSample>,
    pub states: Vec<ViewportState>,
    /// Sampling frequency in Hz (estimated, or the declared nominal).
    pub f: f64,
}

#[derive(Deserialize)]
struct GazeLine {
    t: Option<f64>,
    sx: Option<f64>,
    sy: Option<f64>,
    f_nominal: Option<f64>,
}

#[derive(Serialize)]
struct GazeHeaderOut {
    f_nominal: f64,
}

#[derive(Serialize, Deserialize)]
struct ViewportLine {
    t: f64,
    z: i64,
    zoom: f64,
    pan: [f64; 2],
    win: [f64; 4],
    px_pitch: f64,
    #[serde(default)]
    annotating: bool,
}

/// Parse a gaze log and a viewport log (both JSON-Lines).
///
/// Samples and states come back sorted by time (a warning is logged when
/// the input was out of order). Samples with missing coordinates (blinks,
/// tracker dropouts) are skipped; their timestamps still contribute to the
/// frequency estimate. `f` is the median reciprocal inter-sample interval,
/// falling back to the header's `f_nominal` when fewer than two intervals
/// exist.
pub fn parse_session(gaze_log: &Path, viewport_log: &Path) -> Result<ParsedSession> {
    let gaze_text = fs::read_to_string(gaze_log)?;
    let mut samples: Vec<GazeSample> = Vec::new();
    let mut timestamps: Vec<f64> = Vec::new();
    let mut f_nominal: Option<f64> = None;

    for (lineno, line) in gaze_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: GazeLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("{}: {e}", gaze_log.display()),
        })?;
        if let Some(f) = rec.f_nominal {
            f_nominal = Some(f);
        }
        let Some(t) = rec.t else { continue };
        if !t.is_finite() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("{}: non-finite timestamp", gaze_log.display()),
            });
        }
        timestamps.push(t);
        match (rec.sx, rec.sy) {
            (Some(sx), Some(sy)) if sx.is_finite() && sy.is_finite() => {
                samples.push(GazeSample { t, sx, sy });
            }
            _ => {} // dropout: skipped, not interpolated
        }
    }

    if samples.is_empty() {
        return Err(Error::EmptySession(format!("{} has no valid gaze samples", gaze_log.display())));
    }
    if samples.windows(2).any(|w| w[0].t > w[1].t) {
        log::warn!("{}: out-of-order gaze timestamps, sorting", gaze_log.display());
    }
    samples.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.sx.total_cmp(&b.sx)));
    timestamps.sort_by(f64::total_cmp);

    let f = estimate_frequency(&timestamps).or(f_nominal).ok_or_else(|| {
        Error::Parameter(format!(
            "{}: cannot estimate sampling frequency from a single sample without a declared f_nominal",
            gaze_log.display()
        ))
    })?;

    let viewport_text = fs::read_to_string(viewport_log)?;
    let mut states: Vec<ViewportState> = Vec::new();
    for (lineno, line) in viewport_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ViewportLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: format!("{}: {e}", viewport_log.display()),
        })?;
        if rec.zoom <= 0.0 || rec.win[2] <= 0.0 || rec.win[3] <= 0.0 || rec.px_pitch <= 0.0 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!(
                    "{}: zoom, window size and px_pitch must be positive",
                    viewport_log.display()
                ),
            });
        }
        states.push(ViewportState {
            t: rec.t,
            z: rec.z,
            zoom: rec.zoom,
            pan: (rec.pan[0], rec.pan[1]),
            win: WinRect { left: rec.win[0], top: rec.win[1], width: rec.win[2], height: rec.win[3] },
            px_pitch: rec.px_pitch,
            annotating: rec.annotating,
        });
    }
    states.sort_by(|a, b| a.t.total_cmp(&b.t));

    Ok(ParsedSession { samples, states, f })
}

/// Median reciprocal inter-sample interval, or None with fewer than two
/// distinct timestamps.
fn estimate_frequency(sorted_timestamps: &[f64]) -> Option<f64> {
    let mut recips: Vec<f64> = sorted_timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&dt| dt > 0.0)
        .map(|dt| 1.0 / dt)
        .collect();
    if recips.is_empty() {
        return None;
    }
    recips.sort_by(f64::total_cmp);
    let n = recips.len();
    Some(if n % 2 == 1 { recips[n / 2] } else { 0.5 * (recips[n / 2 - 1] + recips[n / 2]) })
}

/// Map gaze samples through the viewport into voxel coordinates.
///
/// Each sample takes the latest state with `state.t <= sample.t`
/// (last-state-wins). Samples during annotation, outside the axial window,
/// outside the scan or outside the lung mask are dropped.
pub fn map_to_voxels(
    samples: &[GazeSample],
    states: &[ViewportState],
    scan: &ScanVolume,
    mask: &LungMask,
) -> Result<Vec<MappedPoint>> {
    if states.is_empty() {
        return Err(Error::SessionAlignment);
    }
    let mut out = Vec::with_capacity(samples.len());
    for sample in samples {
        let n_before = states.partition_point(|s| s.t <= sample.t);
        if n_before == 0 {
            return Err(Error::SessionAlignment);
        }
        let state_idx = n_before - 1;
        let state = &states[state_idx];
        if state.annotating || !state.win.contains(sample.sx, sample.sy) {
            continue;
        }
        let x = ((sample.sx - state.win.left) / state.zoom + state.pan.0).floor();
        let y = ((sample.sy - state.win.top) / state.zoom + state.pan.1).floor();
        let z = state.z;
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let (xi, yi) = (x as i64, y as i64);
        if !scan.contains(xi, yi, z) || !mask.contains(xi, yi, z) {
            continue;
        }
        out.push(MappedPoint {
            point: VoxelGazePoint { t: sample.t, x: xi as usize, y: yi as usize, z: z as usize },
            state_idx,
        });
    }
    Ok(out)
}

/// Write a gaze log (header line with the nominal frequency, then samples).
pub fn write_gaze_log(path: &Path, f_nominal: f64, samples: &[GazeSample]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&GazeHeaderOut { f_nominal }).unwrap());
    out.push('\n');
    for s in samples {
        out.push_str(&serde_json::to_string(s).unwrap());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a viewport log.
pub fn write_viewport_log(path: &Path, states: &[ViewportState]) -> Result<()> {
    let mut out = String::new();
    for s in states {
        let line = ViewportLine {
            t: s.t,
            z: s.z,
            zoom: s.zoom,
            pan: [s.pan.0, s.pan.1],
            win: [s.win.left, s.win.top, s.win.width, s.win.height],
            px_pitch: s.px_pitch,
            annotating: s.annotating,
        };
        out.push_str(&serde_json::to_string(&line).unwrap());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
