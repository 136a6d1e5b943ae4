use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, ManifestEntry, PipelineError};

/// Fractions of the single split: train, validation, test.
pub const SPLIT_FRACTIONS: [f64; 3] = [0.85, 0.05, 0.10];
/// Validation share of all units, carved from each fold's training side.
pub const VALIDATION_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Holdout {
    #[serde(rename = "split-85-5-10")]
    Split85_5_10,
    #[serde(rename = "kfold")]
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// Unit identifiers (source ids, or manifest paths in per-patch mode) of one fold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Fold {
    pub fn ids(&self, part: Partition) -> &[String] {
        match part {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }

    /// Partition holding `entry`, matched by source id or by path.
    pub fn partition_of(&self, entry: &ManifestEntry) -> Option<Partition> {
        let path = entry.path.to_string_lossy();
        [Partition::Train, Partition::Val, Partition::Test]
            .into_iter()
            .find(|&p| self.ids(p).iter().any(|id| *id == entry.source_id || *id == path))
    }

    pub fn select<'a>(&self, manifest: &'a DatasetManifest, part: Partition) -> Vec<&'a ManifestEntry> {
        let ids: BTreeSet<&str> = self.ids(part).iter().map(String::as_str).collect();
        manifest
            .entries
            .iter()
            .filter(|e| ids.contains(e.source_id.as_str()) || ids.contains(e.path.to_string_lossy().as_ref()))
            .collect()
    }
}

/// Fold index → partitions; serialized as a JSON object keyed by index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FoldPlan {
    pub folds: BTreeMap<usize, Fold>,
}

impl FoldPlan {
    pub fn fold(&self, k: usize) -> Result<&Fold, PipelineError> {
        self.folds
            .get(&k)
            .ok_or_else(|| PipelineError::InvalidInput(format!("fold {k} not in plan (has {})", self.folds.len())))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PipelineError> {
        let plan: FoldPlan = serde_json::from_slice(bytes)?;
        for (k, f) in &plan.folds {
            let mut seen = BTreeSet::new();
            for id in f.train.iter().chain(&f.val).chain(&f.test) {
                if !seen.insert(id) {
                    return Err(PipelineError::InvalidInput(format!(
                        "fold {k}: {id:?} in more than one partition"
                    )));
                }
            }
        }
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

#[derive(Debug, Clone)]
pub struct FoldOptions {
    pub k: usize,
    pub holdout: Holdout,
    pub seed: u64,
    /// Split individual patches instead of source photographs.
    pub per_patch: bool,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub plan: FoldPlan,
    /// Classes missing from some partition.
    pub warnings: Vec<String>,
}

/// Apportions `total` by `weights` with largest-remainder rounding; ties go to the earlier index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

pub fn make_folds(
    manifest: &DatasetManifest,
    k: usize,
    holdout: Holdout,
    seed: u64,
) -> Result<FoldOutcome, PipelineError> {
    make_folds_with(
        manifest,
        &FoldOptions {
            k,
            holdout,
            seed,
            per_patch: false,
        },
    )
}

/// Units with their (majority) label, in stratified order: each class is
/// shuffled, then classes are interleaved in proportion to their size.
fn stratified_units(manifest: &DatasetManifest, per_patch: bool, seed: u64) -> Vec<(String, usize)> {
    let mut votes: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for e in &manifest.entries {
        let id = if per_patch {
            e.path.to_string_lossy().into_owned()
        } else {
            e.source_id.clone()
        };
        *votes.entry(id).or_default().entry(e.label).or_default() += 1;
    }
    let mut by_class: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (id, counts) in votes {
        let label = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(l, _)| *l)
            .expect("non-empty");
        by_class.entry(label).or_default().push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed = Vec::new();
    for (label, mut ids) in by_class {
        ids.shuffle(&mut rng);
        let n = ids.len() as f64;
        for (j, id) in ids.into_iter().enumerate() {
            keyed.push(((j as f64 + 0.5) / n, label, id));
        }
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, l, id)| (id, l)).collect()
}

pub fn make_folds_with(manifest: &DatasetManifest, opts: &FoldOptions) -> Result<FoldOutcome, PipelineError> {
    let units = stratified_units(manifest, opts.per_patch, opts.seed);
    let n = units.len();
    let mut plan = FoldPlan::default();
    match opts.holdout {
        Holdout::Kfold => {
            if opts.k < 2 || n < opts.k {
                return Err(PipelineError::TooFewSources {
                    needed: opts.k.max(2),
                    found: n,
                });
            }
            let n_val = (VALIDATION_FRACTION * n as f64).round() as usize;
            for f in 0..opts.k {
                let mut fold = Fold::default();
                let rest: Vec<&(String, usize)> = units
                    .iter()
                    .enumerate()
                    .filter_map(|(i, u)| {
                        // contiguous blocks of the stratified order keep class proportions
                        if i * opts.k / n == f {
                            fold.test.push(u.0.clone());
                            None
                        } else {
                            Some(u)
                        }
                    })
                    .collect();
                let n_val = n_val.min(rest.len().saturating_sub(1));
                let start = (f * n_val) % rest.len();
                for j in 0..rest.len() {
                    let (id, _) = rest[(start + j) % rest.len()];
                    if j < n_val {
                        fold.val.push(id.clone());
                    } else {
                        fold.train.push(id.clone());
                    }
                }
                plan.folds.insert(f, fold);
            }
        }
        Holdout::Split85_5_10 => {
            let [n_train, n_val, n_test] = <[usize; 3]>::try_from(largest_remainder(n, &SPLIT_FRACTIONS)).expect("3");
            if n_train == 0 || n_test == 0 {
                return Err(PipelineError::TooFewSources { needed: 3, found: n });
            }
            let ids: Vec<String> = units.iter().map(|u| u.0.clone()).collect();
            plan.folds.insert(
                0,
                Fold {
                    test: ids[..n_test].to_vec(),
                    val: ids[n_test..n_test + n_val].to_vec(),
                    train: ids[n_test + n_val..].to_vec(),
                },
            );
        }
    }

    let label_of: BTreeMap<&str, usize> = units.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let classes: BTreeSet<usize> = label_of.values().copied().collect();
    let mut warnings = Vec::new();
    for (f, fold) in &plan.folds {
        for (part, name) in [
            (Partition::Train, "train"),
            (Partition::Val, "val"),
            (Partition::Test, "test"),
        ] {
            let present: BTreeSet<usize> = fold.ids(part).iter().map(|id| label_of[id.as_str()]).collect();
            for c in classes.difference(&present) {
                warnings.push(format!("fold {f}: class {c} absent from {name}"));
            }
        }
    }
    Ok(FoldOutcome { plan, warnings })
}
