//! Study directory access: the manifest, raw inputs and derived artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gfk_core::analytics::Session;
use gfk_core::gaze::{map_to_voxels, parse_session, MappedPoint, ParsedSession};
use gfk_core::model::{self, Candidate, Mark, NoduleTruth, NonNodule};
use gfk_core::simulate::StudyManifest;
use gfk_core::volume::{LungMask, ScanVolume};
use gfk_core::{Error, Result};

pub struct Study {
    pub root: PathBuf,
    pub manifest: StudyManifest,
}

impl Study {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest_path = root.join("study.json");
        if !manifest_path.exists() {
            return Err(Error::Config(format!(
                "missing input {}; point --study at a directory created by `gfk simulate`",
                manifest_path.display()
            )));
        }
        let manifest: StudyManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
                .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        Ok(Study { root: root.to_path_buf(), manifest })
    }

    /// Error unless `path` exists; names the producing command.
    pub fn require(&self, path: PathBuf, produced_by: &str) -> Result<PathBuf> {
        if path.exists() {
            Ok(path)
        } else {
            Err(Error::Config(format!(
                "missing input {}; run `gfk {produced_by}` first",
                path.display()
            )))
        }
    }

    pub fn derived(&self) -> PathBuf {
        self.root.join("derived")
    }

    pub fn scan_path(&self, scan_id: &str) -> PathBuf {
        self.root.join("scans").join(format!("{scan_id}.mhd"))
    }

    pub fn mask_path(&self, scan_id: &str) -> PathBuf {
        self.derived().join("masks").join(format!("{scan_id}.mask.mhd"))
    }

    pub fn attention_dir(&self, annotator: &str) -> PathBuf {
        self.derived().join("attention").join(annotator)
    }

    pub fn eval_json_path(&self, label: &str) -> PathBuf {
        self.derived().join("eval").join(format!("{label}.eval.json"))
    }

    pub fn session_paths(&self, annotator: &str, scan_id: &str) -> (PathBuf, PathBuf) {
        let dir = self.root.join("sessions").join(annotator);
        (dir.join(format!("{scan_id}.gaze.jsonl")), dir.join(format!("{scan_id}.view.jsonl")))
    }

    pub fn load_scan(&self, scan_id: &str) -> Result<ScanVolume> {
        let path = self.require(self.scan_path(scan_id), "simulate")?;
        ScanVolume::read_metaimage(&path)
    }

    pub fn load_mask(&self, scan_id: &str) -> Result<LungMask> {
        let path = self.require(self.mask_path(scan_id), "mask")?;
        LungMask::read_metaimage(&path)
    }

    pub fn truths(&self) -> Result<Vec<NoduleTruth>> {
        let path = self.require(self.root.join("truth.json"), "simulate")?;
        model::load_truth(&path)
    }

    pub fn non_nodules(&self) -> Result<Vec<NonNodule>> {
        let path = self.root.join("non_nodules.json");
        if path.exists() {
            model::load_non_nodules(&path)
        } else {
            Ok(Vec::new())
        }
    }

    pub fn candidates(&self) -> Result<Vec<Candidate>> {
        let path = self.require(self.root.join("candidates.json"), "simulate")?;
        model::load_candidates(&path)
    }

    pub fn marks(&self, annotator: &str) -> Result<Vec<Mark>> {
        let path = self
            .require(self.root.join("marks").join(format!("{annotator}.json")), "simulate")?;
        model::load_marks(&path)
    }

    /// Marks stored under derived/marks (combined or fused sets).
    pub fn derived_marks_path(&self, label: &str) -> PathBuf {
        self.derived().join("marks").join(format!("{label}.json"))
    }

    /// Parse one session's logs and map them into the scan.
    pub fn load_session(
        &self,
        annotator: &str,
        scan_id: &str,
        scan: &ScanVolume,
        mask: &LungMask,
    ) -> Result<(Session, Vec<MappedPoint>, ParsedSession)> {
        let (gaze_path, view_path) = self.session_paths(annotator, scan_id);
        let gaze_path = self.require(gaze_path, "simulate")?;
        let view_path = self.require(view_path, "simulate")?;
        let parsed = parse_session(&gaze_path, &view_path)?;
        let mapped = map_to_voxels(&parsed.samples, &parsed.states, scan, mask)?;
        let session = Session {
            annotator: annotator.to_string(),
            scan_id: scan_id.to_string(),
            points: mapped.iter().map(|m| m.point).collect(),
            f: parsed.f,
        };
        Ok((session, mapped, parsed))
    }

    pub fn annotators_or(&self, one: &Option<String>) -> Vec<String> {
        match one {
            Some(a) => vec![a.clone()],
            None => self.manifest.annotators.clone(),
        }
    }
}

/// Group items by their scan id, keyed in manifest order.
pub fn by_scan<'a, T, F: Fn(&T) -> &str>(
    scan_ids: &[String],
    items: &'a [T],
    key: F,
) -> BTreeMap<String, Vec<&'a T>> {
    let mut map: BTreeMap<String, Vec<&T>> = scan_ids.iter().map(|s| (s.clone(), Vec::new())).collect();
    for item in items {
        if let Some(bucket) = map.get_mut(key(item)) {
            bucket.push(item);
        }
    }
    map
}
