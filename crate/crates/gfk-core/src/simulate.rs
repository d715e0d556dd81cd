//! Synthetic screening studies: a lung phantom plus per-scan reading
//! sessions with drilling gaze traces, attention-dependent human detection,
//! and CADe candidate sets - all deterministic under one seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, ViewportState, WinRect};
use crate::model::{
    Candidate, CharacteristicScores, Mark, MarkKind, MarkSource, NoduleTruth, NonNodule,
};
use crate::volume::{estimate_lung_mask, LungMask, ScanVolume, DEFAULT_HU_THRESHOLD};

/// Simulation parameters. Detection probability for a nodule is
/// `clamp(human_sensitivity_base + attention_sensitivity_slope * t_norm)`
/// where `t_norm` is the dwell fraction spent near that nodule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_scans: usize,
    pub n_annotators: usize,
    /// Inclusive uniform range of planted nodules per scan.
    pub nodules_per_scan: (usize, usize),
    pub reading_time_mean_s: f64,
    pub reading_time_sd_s: f64,
    /// Probability that a session starts on the right lung.
    pub right_first_fraction: f64,
    /// Right-to-left observation time ratio.
    pub right_left_time_ratio: f64,
    pub human_sensitivity_base: f64,
    pub attention_sensitivity_slope: f64,
    /// Upper bound of the per-nodule dwell fraction (drawn uniformly).
    pub nodule_dwell_max_tnorm: f64,
    /// Expected confounder findings per scan; each becomes a human FP mark
    /// and a counted CADe false candidate at the same location.
    pub human_fp_per_scan: f64,
    pub cade_sensitivity: f64,
    /// Expected counted CADe false candidates per scan (the shared
    /// confounders cover min(human_fp_per_scan, cade_fp_per_scan)).
    pub cade_fp_per_scan: f64,
    /// Expected extra CADe candidates landing on listed non-nodules
    /// (ignored by evaluation).
    pub cade_nonnodule_rate: f64,
    /// Listed non-nodule findings per scan.
    pub non_nodules_per_scan: usize,
    /// Eye-tracker sampling frequency in Hz.
    pub f: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 7,
            n_scans: 20,
            n_annotators: 4,
            nodules_per_scan: (1, 3),
            reading_time_mean_s: 181.0,
            reading_time_sd_s: 84.0,
            right_first_fraction: 1.0,
            right_left_time_ratio: 1.2,
            human_sensitivity_base: 0.61,
            attention_sensitivity_slope: 1.0,
            nodule_dwell_max_tnorm: 0.12,
            human_fp_per_scan: 0.34,
            cade_sensitivity: 0.69,
            cade_fp_per_scan: 0.34,
            cade_nonnodule_rate: 0.5,
            non_nodules_per_scan: 2,
            f: 90.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InfeasibleConfig(format!("{name} = {v} outside [0, 1]")));
            }
            Ok(())
        };
        prob("right_first_fraction", self.right_first_fraction)?;
        prob("human_sensitivity_base", self.human_sensitivity_base)?;
        prob("cade_sensitivity", self.cade_sensitivity)?;
        if self.n_scans == 0 || self.n_annotators == 0 {
            return Err(Error::InfeasibleConfig("need at least one scan and annotator".into()));
        }
        if self.nodules_per_scan.0 > self.nodules_per_scan.1 {
            return Err(Error::InfeasibleConfig("nodules_per_scan range is inverted".into()));
        }
        if self.reading_time_mean_s <= 0.0 || self.f <= 0.0 || self.right_left_time_ratio <= 0.0 {
            return Err(Error::InfeasibleConfig(
                "reading time, frequency and side ratio must be positive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.nodule_dwell_max_tnorm) {
            return Err(Error::InfeasibleConfig("nodule_dwell_max_tnorm outside [0, 0.5]".into()));
        }
        let p_max =
            self.human_sensitivity_base + self.attention_sensitivity_slope * self.nodule_dwell_max_tnorm;
        if p_max > 1.0 + 1e-9 {
            return Err(Error::InfeasibleConfig(format!(
                "detection probability saturates at {p_max:.3} > 1; lower the base, slope or dwell"
            )));
        }
        if self.human_fp_per_scan < 0.0 || self.cade_fp_per_scan < 0.0 || self.cade_nonnodule_rate < 0.0
        {
            return Err(Error::InfeasibleConfig("FP rates must be non-negative".into()));
        }
        Ok(())
    }
}

pub const PHANTOM_DIMS: (usize, usize, usize) = (96, 96, 64);
pub const PHANTOM_SPACING: (f64, f64, f64) = (2.5, 2.5, 3.0);

// Simulated viewer geometry: the axial window shows one 48-voxel quadrant.
const SIM_WIN: WinRect = WinRect { left: 100.0, top: 50.0, width: 960.0, height: 960.0 };
const SIM_ZOOM: f64 = 20.0;
const SIM_PX_PITCH: f64 = 0.25;

/// The synthetic chest: two air ellipsoids (lungs) in a 0 HU body with
/// vessel-like soft-tissue tubes inside the lungs.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub scan: ScanVolume,
    pub mask: LungMask,
    /// In-mask vessel voxels (confounder placement pool).
    pub vessel_voxels: Vec<(usize, usize, usize)>,
    /// In-mask voxels per quadrant and slice: `[quadrant][z] -> (x, y)`.
    /// Quadrants: 0 right-anterior, 1 right-posterior, 2 left-anterior,
    /// 3 left-posterior (right = low x).
    quadrant_slices: Vec<Vec<Vec<(usize, usize)>>>,
}

impl Phantom {
    fn quadrant_of(&self, x: usize, y: usize) -> usize {
        let right = x < self.mask.split_x();
        let anterior = y < PHANTOM_DIMS.1 / 2;
        match (right, anterior) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    }

    /// Non-empty slice indices of a quadrant, ascending.
    fn quadrant_z_range(&self, q: usize) -> Vec<usize> {
        (0..PHANTOM_DIMS.2).filter(|&z| !self.quadrant_slices[q][z].is_empty()).collect()
    }
}

/// Build the study phantom and estimate its lung mask through the regular
/// pipeline (threshold + closing).
pub fn build_phantom() -> Result<Phantom> {
    let (nx, ny, nz) = PHANTOM_DIMS;
    let mut data = vec![0i16; nx * ny * nz];
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);

    let lungs = [(29.0f64, 48.0f64, 32.0f64), (67.0, 48.0, 32.0)];
    let radii = (13.0f64, 24.0f64, 27.0f64);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                for &(cx, cy, cz) in &lungs {
                    let dx = (x as f64 - cx) / radii.0;
                    let dy = (y as f64 - cy) / radii.1;
                    let dz = (z as f64 - cz) / radii.2;
                    if dx * dx + dy * dy + dz * dz <= 1.0 {
                        data[idx(x, y, z)] = -1000;
                    }
                }
            }
        }
    }

    // vessel tubes along z inside each lung
    let mut vessel_voxels = Vec::new();
    let offsets = [(0i64, 5i64), (6, -8), (-5, 2)];
    for &(cx, cy, _) in &lungs {
        for &(ox, oy) in &offsets {
            let vx = (cx as i64 + ox) as usize;
            let vy = (cy as i64 + oy) as usize;
            for z in 10..(nz - 10) {
                for (x, y) in [(vx, vy), (vx + 1, vy), (vx, vy + 1)] {
                    if data[idx(x, y, z)] == -1000 {
                        data[idx(x, y, z)] = 50;
                        vessel_voxels.push((x, y, z));
                    }
                }
            }
        }
    }

    let scan = ScanVolume::new(PHANTOM_DIMS, PHANTOM_SPACING, (0.0, 0.0, 0.0), data)?;
    let mask = estimate_lung_mask(&scan, DEFAULT_HU_THRESHOLD, 5.0)?;
    // the vessels sit inside the lungs; closing must have swallowed them
    vessel_voxels.retain(|&(x, y, z)| mask.contains(x as i64, y as i64, z as i64));

    let mut quadrant_slices = vec![vec![Vec::new(); nz]; 4];
    let split = mask.split_x();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.contains(x as i64, y as i64, z as i64) {
                    let right = x < split;
                    let anterior = y < ny / 2;
                    let q = match (right, anterior) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    quadrant_slices[q][z].push((x, y));
                }
            }
        }
    }

    Ok(Phantom { scan, mask, vessel_voxels, quadrant_slices })
}

/// One generated reading session (a single annotator over one scan).
#[derive(Debug, Clone)]
pub struct SimSession {
    pub annotator: String,
    pub samples: Vec<GazeSample>,
    pub states: Vec<ViewportState>,
    pub marks: Vec<Mark>,
    pub f: f64,
    pub reading_time_s: f64,
    /// Realized dwell fraction per truth id.
    pub dwell_tnorm: BTreeMap<String, f64>,
    pub detected: BTreeMap<String, bool>,
}

#[derive(Debug, Clone)]
pub struct SimScan {
    pub scan_id: String,
    pub truths: Vec<NoduleTruth>,
    pub non_nodules: Vec<NonNodule>,
    /// Raw CADe output (before lung filtering / merging).
    pub candidates: Vec<Candidate>,
    pub sessions: Vec<SimSession>,
}

#[derive(Debug, Clone)]
pub struct SimStudy {
    pub cfg: SimConfig,
    pub phantom: Phantom,
    pub scans: Vec<SimScan>,
}

/// Index file written alongside a study directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyManifest {
    pub seed: u64,
    pub f: f64,
    pub scan_ids: Vec<String>,
    pub annotators: Vec<String>,
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    mean + sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let l = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
    }
}

fn world_of(v: (usize, usize, usize)) -> [f64; 3] {
    [
        v.0 as f64 * PHANTOM_SPACING.0,
        v.1 as f64 * PHANTOM_SPACING.1,
        v.2 as f64 * PHANTOM_SPACING.2,
    ]
}

fn rater_scores(rng: &mut ChaCha8Rng) -> Vec<CharacteristicScores> {
    let base = CharacteristicScores {
        calcification: rng.gen_range(2..=5),
        internal_structure: rng.gen_range(2..=4),
        lobulation: rng.gen_range(2..=4),
        malignancy: rng.gen_range(2..=4),
        margin: rng.gen_range(2..=4),
        sphericity: rng.gen_range(2..=4),
        spiculation: rng.gen_range(2..=4),
        subtlety: rng.gen_range(2..=4),
        texture: rng.gen_range(2..=4),
    };
    (0..4)
        .map(|_| {
            let jitter = |v: u8, max: u8, rng: &mut ChaCha8Rng| {
                (v as i8 + rng.gen_range(-1i8..=1)).clamp(1, max as i8) as u8
            };
            CharacteristicScores {
                calcification: jitter(base.calcification, 6, rng),
                internal_structure: jitter(base.internal_structure, 5, rng),
                lobulation: jitter(base.lobulation, 5, rng),
                malignancy: jitter(base.malignancy, 5, rng),
                margin: jitter(base.margin, 5, rng),
                sphericity: jitter(base.sphericity, 5, rng),
                spiculation: jitter(base.spiculation, 5, rng),
                subtlety: jitter(base.subtlety, 5, rng),
                texture: jitter(base.texture, 5, rng),
            }
        })
        .collect()
}

fn annotator_scores(truth: &NoduleTruth, rng: &mut ChaCha8Rng) -> CharacteristicScores {
    let mean_of = |get: fn(&CharacteristicScores) -> u8| -> f64 {
        truth.raters.iter().map(|r| get(r) as f64).sum::<f64>() / truth.raters.len() as f64
    };
    let pick = |mean: f64, max: u8, rng: &mut ChaCha8Rng| -> u8 {
        let jitter = match rng.gen_range(0..4) {
            0 => -1i8,
            1 => 1,
            _ => 0,
        };
        ((mean.round() as i8) + jitter).clamp(1, max as i8) as u8
    };
    CharacteristicScores {
        calcification: pick(mean_of(|s| s.calcification), 6, rng),
        internal_structure: pick(mean_of(|s| s.internal_structure), 5, rng),
        lobulation: pick(mean_of(|s| s.lobulation), 5, rng),
        malignancy: pick(mean_of(|s| s.malignancy), 5, rng),
        margin: pick(mean_of(|s| s.margin), 5, rng),
        sphericity: pick(mean_of(|s| s.sphericity), 5, rng),
        spiculation: pick(mean_of(|s| s.spiculation), 5, rng),
        subtlety: pick(mean_of(|s| s.subtlety), 5, rng),
        texture: pick(mean_of(|s| s.texture), 5, rng),
    }
}

/// Minimum world-mm separation between planted findings.
const FINDING_SEPARATION_MM: f64 = 25.0;

fn far_from(p: [f64; 3], others: &[[f64; 3]], min_mm: f64) -> bool {
    others.iter().all(|o| crate::model::distance_mm(p, *o) >= min_mm)
}

/// Pick an in-mask voxel in the given quadrant whose r_vox-neighbourhood
/// stays inside the mask.
fn place_in_quadrant(
    phantom: &Phantom,
    q: usize,
    margin_vox: i64,
    taken: &[[f64; 3]],
    rng: &mut ChaCha8Rng,
) -> Option<(usize, usize, usize)> {
    let zs = phantom.quadrant_z_range(q);
    if zs.is_empty() {
        return None;
    }
    for _ in 0..200 {
        let z = zs[rng.gen_range(0..zs.len())];
        if z < 8 || z >= PHANTOM_DIMS.2 - 8 {
            continue;
        }
        let options = &phantom.quadrant_slices[q][z];
        let (x, y) = options[rng.gen_range(0..options.len())];
        let m = margin_vox;
        let inside = [
            (x as i64 - m, y as i64, z as i64),
            (x as i64 + m, y as i64, z as i64),
            (x as i64, y as i64 - m, z as i64),
            (x as i64, y as i64 + m, z as i64),
            (x as i64, y as i64, z as i64 - m.min(2)),
            (x as i64, y as i64, z as i64 + m.min(2)),
        ]
        .iter()
        .all(|&(a, b, c)| phantom.mask.contains(a, b, c));
        if inside && far_from(world_of((x, y, z)), taken, FINDING_SEPARATION_MM) {
            return Some((x, y, z));
        }
    }
    None
}

struct ScanLayout {
    truths: Vec<NoduleTruth>,
    non_nodules: Vec<NonNodule>,
    /// Shared confounders: each yields a human FP mark and a counted CADe
    /// false candidate at (approximately) the same spot.
    confounders: Vec<[f64; 3]>,
    candidates: Vec<Candidate>,
}

fn generate_scan_layout(
    phantom: &Phantom,
    cfg: &SimConfig,
    scan_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<ScanLayout> {
    let mut taken: Vec<[f64; 3]> = Vec::new();

    // nodules, spread over quadrants to keep per-quadrant dwell feasible
    let n_nodules = rng.gen_range(cfg.nodules_per_scan.0..=cfg.nodules_per_scan.1);
    let mut truths = Vec::new();
    for k in 0..n_nodules {
        let q = k % 4;
        let radius = rng.gen_range(2.0..4.0);
        let margin = (radius / PHANTOM_SPACING.0).ceil() as i64 + 1;
        let v = place_in_quadrant(phantom, q, margin, &taken, rng).ok_or_else(|| {
            Error::InfeasibleConfig(format!(
                "cannot place nodule {k} in quadrant {q}; too many findings for the phantom"
            ))
        })?;
        let centroid = world_of(v);
        taken.push(centroid);
        truths.push(NoduleTruth {
            id: format!("n-{scan_id}-{k}"),
            scan_id: scan_id.to_string(),
            centroid_mm: centroid,
            equivalent_radius_mm: radius,
            raters: rater_scores(rng),
        });
    }

    // listed non-nodule findings at vessel voxels
    let mut non_nodules = Vec::new();
    for k in 0..cfg.non_nodules_per_scan {
        let mut placed = false;
        for _ in 0..200 {
            let v = phantom.vessel_voxels[rng.gen_range(0..phantom.vessel_voxels.len())];
            let w = world_of(v);
            if far_from(w, &taken, FINDING_SEPARATION_MM) {
                taken.push(w);
                non_nodules.push(NonNodule {
                    id: format!("x-{scan_id}-{k}"),
                    scan_id: scan_id.to_string(),
                    centroid_mm: w,
                    radius_mm: if rng.gen_bool(0.5) { Some(rng.gen_range(1.0..2.0)) } else { None },
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleConfig("cannot place non-nodule findings".into()));
        }
    }

    // shared confounders (human FP + counted CADe FP)
    let shared_rate = cfg.human_fp_per_scan.min(cfg.cade_fp_per_scan);
    let n_conf = poisson(rng, shared_rate);
    let mut confounders = Vec::new();
    for _ in 0..n_conf {
        for _ in 0..200 {
            let v = phantom.vessel_voxels[rng.gen_range(0..phantom.vessel_voxels.len())];
            let w = world_of(v);
            if far_from(w, &taken, FINDING_SEPARATION_MM) {
                taken.push(w);
                confounders.push(w);
                break;
            }
        }
    }

    // CADe candidates
    let mut candidates = Vec::new();
    let mut k = 0usize;
    let push = |c: Candidate, candidates: &mut Vec<Candidate>| candidates.push(c);
    for truth in &truths {
        if rng.gen_bool(cfg.cade_sensitivity) {
            let jit = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let side = 2.0 * truth.equivalent_radius_mm + 2.0;
            let centroid = [
                truth.centroid_mm[0] + jit[0],
                truth.centroid_mm[1] + jit[1],
                truth.centroid_mm[2] + jit[2],
            ];
            push(
                Candidate {
                    id: format!("c-{scan_id}-{k}"),
                    scan_id: scan_id.to_string(),
                    centroid_mm: centroid,
                    bbox_mm: [side, side],
                    score: rng.gen_range(0.55..0.98),
                },
                &mut candidates,
            );
            k += 1;
            // occasional duplicate detection that the merge step collapses
            if rng.gen_bool(0.2) {
                push(
                    Candidate {
                        id: format!("c-{scan_id}-{k}"),
                        scan_id: scan_id.to_string(),
                        centroid_mm: [centroid[0] + 1.5, centroid[1], centroid[2]],
                        bbox_mm: [side, side],
                        score: (rng.gen_range(0.45..0.85) as f64).min(0.98),
                    },
                    &mut candidates,
                );
                k += 1;
            }
        }
    }
    for w in &confounders {
        push(
            Candidate {
                id: format!("c-{scan_id}-{k}"),
                scan_id: scan_id.to_string(),
                centroid_mm: [
                    w[0] + rng.gen_range(-0.3..0.3),
                    w[1] + rng.gen_range(-0.3..0.3),
                    w[2] + rng.gen_range(-0.3..0.3),
                ],
                bbox_mm: [6.0, 6.0],
                score: rng.gen_range(0.3..0.75),
            },
            &mut candidates,
        );
        k += 1;
    }
    for _ in 0..poisson(rng, cfg.cade_nonnodule_rate) {
        if non_nodules.is_empty() {
            break;
        }
        let nn = &non_nodules[rng.gen_range(0..non_nodules.len())];
        push(
            Candidate {
                id: format!("c-{scan_id}-{k}"),
                scan_id: scan_id.to_string(),
                centroid_mm: nn.centroid_mm,
                bbox_mm: [5.0, 5.0],
                score: rng.gen_range(0.3..0.75),
            },
            &mut candidates,
        );
        k += 1;
    }
    // occasional out-of-lung detection that the lung filter drops
    if rng.gen_bool(0.3) {
        push(
            Candidate {
                id: format!("c-{scan_id}-{k}"),
                scan_id: scan_id.to_string(),
                centroid_mm: world_of((8, 8, 32)),
                bbox_mm: [6.0, 6.0],
                score: rng.gen_range(0.3..0.6),
            },
            &mut candidates,
        );
    }

    Ok(ScanLayout { truths, non_nodules, confounders, candidates })
}

/// Per-quadrant dwell plan entry: a finding the reader pauses on.
struct DwellTarget {
    voxel: (usize, usize, usize),
    samples: usize,
    truth_id: Option<String>,
}

fn generate_session(
    phantom: &Phantom,
    cfg: &SimConfig,
    layout: &ScanLayout,
    scan_id: &str,
    annotator: &str,
    rng: &mut ChaCha8Rng,
) -> Result<SimSession> {
    let reading_time = normal(rng, cfg.reading_time_mean_s, cfg.reading_time_sd_s).clamp(30.0, 600.0);
    let n_samples = ((reading_time * cfg.f).round() as usize).max(8) + 1;
    let total_time = (n_samples - 1) as f64 / cfg.f;

    // side budgets
    let r = cfg.right_left_time_ratio;
    let n_right = ((n_samples as f64) * r / (1.0 + r)).round() as usize;
    let n_left = n_samples - n_right;
    let right_first = rng.gen_bool(cfg.right_first_fraction);
    // quadrant visit order and per-quadrant sample budgets
    let quadrants: [usize; 4] = if right_first { [0, 1, 2, 3] } else { [2, 3, 0, 1] };
    let budget_of = |q: usize| -> usize {
        let side_total = if q < 2 { n_right } else { n_left };
        if q % 2 == 0 {
            side_total / 2
        } else {
            side_total - side_total / 2
        }
    };

    // dwell plans per quadrant: nodules plus confounders
    let mut dwell_per_quadrant: Vec<Vec<DwellTarget>> =
        (0..4).map(|_| Vec::new()).collect();
    let mut dwell_tnorm: BTreeMap<String, f64> = BTreeMap::new();
    for truth in &layout.truths {
        let v = phantom
            .scan
            .world_to_voxel((truth.centroid_mm[0], truth.centroid_mm[1], truth.centroid_mm[2]))
            .ok_or_else(|| Error::InfeasibleConfig("truth outside phantom".into()))?;
        let q = phantom.quadrant_of(v.0, v.1);
        let tnorm = rng.gen_range(0.0..cfg.nodule_dwell_max_tnorm);
        let samples = (tnorm * (n_samples - 1) as f64).round() as usize;
        dwell_per_quadrant[q].push(DwellTarget {
            voxel: v,
            samples,
            truth_id: Some(truth.id.clone()),
        });
    }
    for w in &layout.confounders {
        if let Some(v) = phantom.scan.world_to_voxel((w[0], w[1], w[2])) {
            let q = phantom.quadrant_of(v.0, v.1);
            let samples =
                (rng.gen_range(0.0..0.06) * (n_samples - 1) as f64).round() as usize;
            dwell_per_quadrant[q].push(DwellTarget { voxel: v, samples, truth_id: None });
        }
    }

    // cap dwell to 70% of each quadrant budget, scaling down if needed
    for q in 0..4 {
        let budget = budget_of(q);
        let dwell_sum: usize = dwell_per_quadrant[q].iter().map(|d| d.samples).sum();
        let cap = (budget as f64 * 0.7) as usize;
        if dwell_sum > cap && dwell_sum > 0 {
            let scale = cap as f64 / dwell_sum as f64;
            for d in &mut dwell_per_quadrant[q] {
                d.samples = (d.samples as f64 * scale).floor() as usize;
            }
        }
        dwell_per_quadrant[q].sort_by_key(|d| d.voxel.2);
    }

    // assemble per-sample voxel targets, quadrant by quadrant
    let mut targets: Vec<(usize, usize, usize)> = Vec::with_capacity(n_samples);
    for &q in &quadrants {
        let budget = budget_of(q);
        if budget == 0 {
            continue;
        }
        let zs = phantom.quadrant_z_range(q);
        if zs.is_empty() {
            return Err(Error::InfeasibleConfig(format!("empty lung quadrant {q}")));
        }
        let dwells = &dwell_per_quadrant[q];
        let dwell_total: usize = dwells.iter().map(|d| d.samples).sum();
        let sweep_total = budget - dwell_total.min(budget);
        let mut emitted_dwell = vec![false; dwells.len()];

        for k in 0..sweep_total {
            let zi = k * zs.len() / sweep_total.max(1);
            let z = zs[zi.min(zs.len() - 1)];
            // pause on findings whose slice the sweep just reached
            for (di, d) in dwells.iter().enumerate() {
                if !emitted_dwell[di] && d.voxel.2 <= z {
                    emitted_dwell[di] = true;
                    emit_dwell(phantom, q, d, &mut targets, rng);
                }
            }
            let options = &phantom.quadrant_slices[q][z];
            targets.push(pick_voxel(options, z, rng));
        }
        for (di, d) in dwells.iter().enumerate() {
            if !emitted_dwell[di] {
                emit_dwell(phantom, q, d, &mut targets, rng);
            }
        }
    }
    // rounding slack: pad with the last target
    while targets.len() < n_samples {
        let last = *targets.last().expect("at least one quadrant emitted samples");
        targets.push(last);
    }
    targets.truncate(n_samples);

    // targets -> screen samples + viewport states
    let mut samples = Vec::with_capacity(n_samples);
    let mut states: Vec<ViewportState> = Vec::new();
    let split = phantom.mask.split_x();
    for (i, &(x, y, z)) in targets.iter().enumerate() {
        let t = i as f64 / cfg.f;
        let pan = (
            if x < split { 0.0 } else { split as f64 },
            if y < PHANTOM_DIMS.1 / 2 { 0.0 } else { (PHANTOM_DIMS.1 / 2) as f64 },
        );
        let need_new = match states.last() {
            None => true,
            Some(s) => s.z != z as i64 || s.pan != pan,
        };
        if need_new {
            states.push(ViewportState {
                t,
                z: z as i64,
                zoom: SIM_ZOOM,
                pan,
                win: SIM_WIN,
                px_pitch: SIM_PX_PITCH,
                annotating: false,
            });
        }
        samples.push(GazeSample {
            t,
            sx: SIM_WIN.left + (x as f64 - pan.0 + 0.5) * SIM_ZOOM,
            sy: SIM_WIN.top + (y as f64 - pan.1 + 0.5) * SIM_ZOOM,
        });
    }

    // detection draws and marks
    let mut marks = Vec::new();
    let mut detected = BTreeMap::new();
    for truth in &layout.truths {
        let realized: usize = dwell_per_quadrant
            .iter()
            .flatten()
            .filter(|d| d.truth_id.as_deref() == Some(truth.id.as_str()))
            .map(|d| d.samples)
            .sum();
        let tnorm = realized as f64 / (n_samples - 1) as f64;
        dwell_tnorm.insert(truth.id.clone(), tnorm);
        let p = (cfg.human_sensitivity_base + cfg.attention_sensitivity_slope * tnorm)
            .clamp(0.0, 1.0);
        let hit = rng.gen_bool(p);
        detected.insert(truth.id.clone(), hit);
        if hit {
            marks.push(Mark {
                id: format!("m-{scan_id}-{annotator}-{}", truth.id),
                scan_id: scan_id.to_string(),
                annotator: annotator.to_string(),
                centroid_mm: [
                    truth.centroid_mm[0] + rng.gen_range(-0.4..0.4),
                    truth.centroid_mm[1] + rng.gen_range(-0.4..0.4),
                    truth.centroid_mm[2] + rng.gen_range(-0.4..0.4),
                ],
                kind: MarkKind::Nodule,
                scores: Some(annotator_scores(truth, rng)),
                source: MarkSource::Radiologist,
            });
        }
    }
    for (ci, w) in layout.confounders.iter().enumerate() {
        marks.push(Mark {
            id: format!("m-{scan_id}-{annotator}-fp{ci}"),
            scan_id: scan_id.to_string(),
            annotator: annotator.to_string(),
            centroid_mm: [
                w[0] + rng.gen_range(-0.3..0.3),
                w[1] + rng.gen_range(-0.3..0.3),
                w[2] + rng.gen_range(-0.3..0.3),
            ],
            kind: MarkKind::Nodule,
            scores: None,
            source: MarkSource::Radiologist,
        });
    }

    Ok(SimSession {
        annotator: annotator.to_string(),
        samples,
        states,
        marks,
        f: cfg.f,
        reading_time_s: total_time,
        dwell_tnorm,
        detected,
    })
}

fn pick_voxel(options: &[(usize, usize)], z: usize, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let (x, y) = options[rng.gen_range(0..options.len())];
    (x, y, z)
}

fn emit_dwell(
    phantom: &Phantom,
    q: usize,
    d: &DwellTarget,
    targets: &mut Vec<(usize, usize, usize)>,
    rng: &mut ChaCha8Rng,
) {
    let (vx, vy, vz) = d.voxel;
    for _ in 0..d.samples {
        let jx = (vx as i64 + rng.gen_range(-1i64..=1)).max(0) as usize;
        let jy = (vy as i64 + rng.gen_range(-1i64..=1)).max(0) as usize;
        // stay in-mask and in-quadrant; fall back to the finding voxel
        let ok = phantom.mask.contains(jx as i64, jy as i64, vz as i64)
            && phantom.quadrant_of(jx, jy) == q;
        targets.push(if ok { (jx, jy, vz) } else { (vx, vy, vz) });
    }
}

/// Derive a per-stream seed from the study seed.
fn stream_seed(study_seed: u64, scan_idx: usize, stream: u64) -> u64 {
    study_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((scan_idx as u64) << 8)
        .wrapping_add(stream)
}

/// Generate a full study against a caller-provided phantom.
pub fn simulate_study_with_phantom(cfg: &SimConfig, phantom: &Phantom) -> Result<SimStudy> {
    cfg.validate()?;
    let scans: Result<Vec<SimScan>> = (0..cfg.n_scans)
        .into_par_iter()
        .map(|si| {
            let scan_id = format!("scan_{si:03}");
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, si, 0));
            let layout = generate_scan_layout(phantom, cfg, &scan_id, &mut rng)?;
            let sessions: Result<Vec<SimSession>> = (0..cfg.n_annotators)
                .map(|ai| {
                    let annotator = format!("rad{}", ai + 1);
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, si, 1 + ai as u64));
                    generate_session(phantom, cfg, &layout, &scan_id, &annotator, &mut rng)
                })
                .collect();
            Ok(SimScan {
                scan_id,
                truths: layout.truths,
                non_nodules: layout.non_nodules,
                candidates: layout.candidates,
                sessions: sessions?,
            })
        })
        .collect();
    Ok(SimStudy { cfg: cfg.clone(), phantom: phantom.clone(), scans: scans? })
}

/// Generate a full study (builds the phantom first).
pub fn simulate_study(cfg: &SimConfig) -> Result<SimStudy> {
    let phantom = build_phantom()?;
    simulate_study_with_phantom(cfg, &phantom)
}

impl SimStudy {
    pub fn manifest(&self) -> StudyManifest {
        StudyManifest {
            seed: self.cfg.seed,
            f: self.cfg.f,
            scan_ids: self.scans.iter().map(|s| s.scan_id.clone()).collect(),
            annotators: (0..self.cfg.n_annotators).map(|a| format!("rad{}", a + 1)).collect(),
        }
    }

    /// Write the study directory consumed by the CLI subcommands:
    /// scans as MetaImage, truth/marks/candidates/non-nodules as JSON and
    /// per-session gaze + viewport JSONL logs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("scans"))?;
        std::fs::create_dir_all(dir.join("marks"))?;
        std::fs::write(
            dir.join("study.json"),
            serde_json::to_string_pretty(&self.manifest()).map_err(|e| Error::Format(e.to_string()))?,
        )?;

        let mut truths = Vec::new();
        let mut non_nodules = Vec::new();
        let mut candidates = Vec::new();
        let mut marks_by_annotator: BTreeMap<String, Vec<Mark>> = BTreeMap::new();
        for scan in &self.scans {
            self.phantom.scan.write_metaimage(&dir.join("scans").join(format!("{}.mhd", scan.scan_id)))?;
            truths.extend(scan.truths.iter().cloned());
            non_nodules.extend(scan.non_nodules.iter().cloned());
            candidates.extend(scan.candidates.iter().cloned());
            for session in &scan.sessions {
                marks_by_annotator
                    .entry(session.annotator.clone())
                    .or_default()
                    .extend(session.marks.iter().cloned());
                let sdir = dir.join("sessions").join(&session.annotator);
                std::fs::create_dir_all(&sdir)?;
                crate::gaze::write_gaze_log(
                    &sdir.join(format!("{}.gaze.jsonl", scan.scan_id)),
                    session.f,
                    &session.samples,
                )?;
                crate::gaze::write_viewport_log(
                    &sdir.join(format!("{}.view.jsonl", scan.scan_id)),
                    &session.states,
                )?;
            }
        }
        crate::model::save_truth(&dir.join("truth.json"), &truths)?;
        crate::model::save_non_nodules(&dir.join("non_nodules.json"), &non_nodules)?;
        crate::model::save_candidates(&dir.join("candidates.json"), &candidates)?;
        for (annotator, marks) in &marks_by_annotator {
            crate::model::save_marks(&dir.join("marks").join(format!("{annotator}.json")), marks)?;
        }
        Ok(())
    }
}
