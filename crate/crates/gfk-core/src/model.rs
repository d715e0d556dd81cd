//! Ground-truth nodules, radiologist marks, CADe candidates and the listed
//! non-nodule findings, with their JSON file formats.
//!
//! World-mm coordinates are the interchange unit; voxel coordinates are
//! derived per scan through [`crate::volume::ScanVolume`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Study inclusion rule: nodules below this equivalent radius are rejected.
pub const MIN_EQUIVALENT_RADIUS_MM: f64 = 1.5;

/// Euclidean distance between two world-mm points.
pub fn distance_mm(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Subjective characterization scales: calcification runs 1-6, everything
/// else 1-5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicScores {
    pub calcification: u8,
    pub internal_structure: u8,
    pub lobulation: u8,
    pub malignancy: u8,
    pub margin: u8,
    pub sphericity: u8,
    pub spiculation: u8,
    pub subtlety: u8,
    pub texture: u8,
}

impl CharacteristicScores {
    pub fn validate(&self, context: &str) -> Result<()> {
        let check = |name: &str, value: u8, max: u8| -> Result<()> {
            if value < 1 || value > max {
                return Err(Error::Schema {
                    field: format!("{context}.{name}"),
                    message: format!("score {value} outside 1..={max}"),
                });
            }
            Ok(())
        };
        check("calcification", self.calcification, 6)?;
        check("internal_structure", self.internal_structure, 5)?;
        check("lobulation", self.lobulation, 5)?;
        check("malignancy", self.malignancy, 5)?;
        check("margin", self.margin, 5)?;
        check("sphericity", self.sphericity, 5)?;
        check("spiculation", self.spiculation, 5)?;
        check("subtlety", self.subtlety, 5)?;
        check("texture", self.texture, 5)?;
        Ok(())
    }
}

/// The seven ordinal characteristics compared in the agreement analysis
/// (calcification and internal structure are categorical and excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrdinalCharacteristic {
    Lobulation,
    Malignancy,
    Margin,
    Sphericity,
    Spiculation,
    Subtlety,
    Texture,
}

pub const ORDINAL_CHARACTERISTICS: [OrdinalCharacteristic; 7] = [
    OrdinalCharacteristic::Lobulation,
    OrdinalCharacteristic::Malignancy,
    OrdinalCharacteristic::Margin,
    OrdinalCharacteristic::Sphericity,
    OrdinalCharacteristic::Spiculation,
    OrdinalCharacteristic::Subtlety,
    OrdinalCharacteristic::Texture,
];

impl OrdinalCharacteristic {
    pub fn name(&self) -> &'static str {
        match self {
            OrdinalCharacteristic::Lobulation => "lobulation",
            OrdinalCharacteristic::Malignancy => "malignancy",
            OrdinalCharacteristic::Margin => "margin",
            OrdinalCharacteristic::Sphericity => "sphericity",
            OrdinalCharacteristic::Spiculation => "spiculation",
            OrdinalCharacteristic::Subtlety => "subtlety",
            OrdinalCharacteristic::Texture => "texture",
        }
    }

    pub fn of(&self, s: &CharacteristicScores) -> u8 {
        match self {
            OrdinalCharacteristic::Lobulation => s.lobulation,
            OrdinalCharacteristic::Malignancy => s.malignancy,
            OrdinalCharacteristic::Margin => s.margin,
            OrdinalCharacteristic::Sphericity => s.sphericity,
            OrdinalCharacteristic::Spiculation => s.spiculation,
            OrdinalCharacteristic::Subtlety => s.subtlety,
            OrdinalCharacteristic::Texture => s.texture,
        }
    }
}

/// A ground-truth nodule with per-rater characterizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoduleTruth {
    pub id: String,
    pub scan_id: String,
    pub centroid_mm: [f64; 3],
    pub equivalent_radius_mm: f64,
    pub raters: Vec<CharacteristicScores>,
}

impl NoduleTruth {
    /// Matching threshold basis: nodule diameter = 2 x equivalent radius.
    pub fn diameter_mm(&self) -> f64 {
        2.0 * self.equivalent_radius_mm
    }

    pub fn validate(&self) -> Result<()> {
        if !self.centroid_mm.iter().all(|c| c.is_finite()) {
            return Err(Error::Schema {
                field: format!("truth[{}].centroid_mm", self.id),
                message: "coordinates must be finite".into(),
            });
        }
        if self.equivalent_radius_mm < MIN_EQUIVALENT_RADIUS_MM {
            return Err(Error::Schema {
                field: format!("truth[{}].equivalent_radius_mm", self.id),
                message: format!(
                    "radius {} below the {} mm inclusion rule",
                    self.equivalent_radius_mm, MIN_EQUIVALENT_RADIUS_MM
                ),
            });
        }
        if self.raters.is_empty() {
            return Err(Error::Schema {
                field: format!("truth[{}].raters", self.id),
                message: "at least one rater is required".into(),
            });
        }
        for (i, r) in self.raters.iter().enumerate() {
            r.validate(&format!("truth[{}].raters[{i}]", self.id))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Nodule,
    NonNodulePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkSource {
    #[default]
    Radiologist,
    Cade,
}

/// A point annotation from a reader (or, after fusion, from the CADe).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub id: String,
    pub scan_id: String,
    pub annotator: String,
    pub centroid_mm: [f64; 3],
    pub kind: MarkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<CharacteristicScores>,
    #[serde(default)]
    pub source: MarkSource,
}

impl Mark {
    pub fn validate(&self) -> Result<()> {
        if !self.centroid_mm.iter().all(|c| c.is_finite()) {
            return Err(Error::Schema {
                field: format!("mark[{}].centroid_mm", self.id),
                message: "coordinates must be finite".into(),
            });
        }
        if let Some(scores) = &self.scores {
            scores.validate(&format!("mark[{}].scores", self.id))?;
        }
        Ok(())
    }
}

/// A CADe detection: in-plane bounding box plus nodule probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub scan_id: String,
    pub centroid_mm: [f64; 3],
    pub bbox_mm: [f64; 2],
    pub score: f64,
}

impl Candidate {
    pub fn max_bbox_dim(&self) -> f64 {
        self.bbox_mm[0].max(self.bbox_mm[1])
    }

    pub fn validate(&self) -> Result<()> {
        if !self.centroid_mm.iter().all(|c| c.is_finite()) {
            return Err(Error::Schema {
                field: format!("candidate[{}].centroid_mm", self.id),
                message: "coordinates must be finite".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Schema {
                field: format!("candidate[{}].score", self.id),
                message: format!("score {} outside [0, 1]", self.score),
            });
        }
        if self.bbox_mm[0] <= 0.0 || self.bbox_mm[1] <= 0.0 {
            return Err(Error::Schema {
                field: format!("candidate[{}].bbox_mm", self.id),
                message: "bounding box dimensions must be positive".into(),
            });
        }
        Ok(())
    }
}

/// A listed non-nodule finding; marks hitting one are neither TP nor FP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonNodule {
    pub id: String,
    pub scan_id: String,
    pub centroid_mm: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_mm: Option<f64>,
}

impl NonNodule {
    /// Hit distance: listed radius doubled when present, otherwise the 3 mm
    /// point-annotation protocol bound.
    pub fn hit_distance_mm(&self) -> f64 {
        self.radius_mm.map(|r| 2.0 * r).unwrap_or(3.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.centroid_mm.iter().all(|c| c.is_finite()) {
            return Err(Error::Schema {
                field: format!("non_nodule[{}].centroid_mm", self.id),
                message: "coordinates must be finite".into(),
            });
        }
        if let Some(r) = self.radius_mm {
            if r <= 0.0 {
                return Err(Error::Schema {
                    field: format!("non_nodule[{}].radius_mm", self.id),
                    message: "radius must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

fn load_validated<T, F>(path: &Path, validate: F) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    F: Fn(&T) -> Result<()>,
{
    let text = fs::read_to_string(path)?;
    let items: Vec<T> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for item in &items {
        validate(item)?;
    }
    Ok(items)
}

fn save_json<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let text = serde_json::to_string_pretty(items)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_truth(path: &Path) -> Result<Vec<NoduleTruth>> {
    load_validated(path, NoduleTruth::validate)
}

pub fn load_marks(path: &Path) -> Result<Vec<Mark>> {
    load_validated(path, Mark::validate)
}

pub fn load_candidates(path: &Path) -> Result<Vec<Candidate>> {
    load_validated(path, Candidate::validate)
}

pub fn load_non_nodules(path: &Path) -> Result<Vec<NonNodule>> {
    load_validated(path, NonNodule::validate)
}

pub fn save_truth(path: &Path, items: &[NoduleTruth]) -> Result<()> {
    save_json(path, items)
}

pub fn save_marks(path: &Path, items: &[Mark]) -> Result<()> {
    save_json(path, items)
}

pub fn save_candidates(path: &Path, items: &[Candidate]) -> Result<()> {
    save_json(path, items)
}

pub fn save_non_nodules(path: &Path, items: &[NonNodule]) -> Result<()> {
    save_json(path, items)
}

/// Uniform score set for fixtures (all nine characteristics set to `v`).
#[cfg(test)]
pub(crate) fn test_scores(v: u8) -> CharacteristicScores {
    CharacteristicScores {
        calcification: v.min(6),
        internal_structure: v,
        lobulation: v,
        malignancy: v,
        margin: v,
        sphericity: v,
        spiculation: v,
        subtlety: v,
        texture: v,
    }
}
