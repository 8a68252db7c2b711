//! Triplet manifests from style clusters.
//!
//! Inside a cluster every ordered pair of distinct stylized images gives one
//! triplet: the first image is the style reference, the second is the target,
//! and the target's content reference completes it. Synthetic triplets use
//! externally generated content references and, optionally, generated style
//! references; the builder only consumes the asset map and never runs a
//! generator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{
    derive_seed, read_ndjson, resolve_labels, Consistency, ImageKind, LabelRecord, Triplet, TripletSource,
};
use crate::error::{Error, Result};
use crate::ingest::ImageCatalog;
use crate::planner::DEFAULT_PROMPT;
use crate::sampling::permutation_prefix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Pairwise,
    GeneratedStyleRef,
    Both,
}

impl MatchMode {
    fn pairwise(self) -> bool {
        matches!(self, MatchMode::Pairwise | MatchMode::Both)
    }

    fn generated(self) -> bool {
        matches!(self, MatchMode::GeneratedStyleRef | MatchMode::Both)
    }
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pairwise" => Ok(MatchMode::Pairwise),
            "generated_style_ref" | "generated-style-ref" => Ok(MatchMode::GeneratedStyleRef),
            "both" => Ok(MatchMode::Both),
            other => Err(format!("unknown match mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub mode: MatchMode,
    pub max_pairs_per_cluster: Option<usize>,
    pub seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            mode: MatchMode::Pairwise,
            max_pairs_per_cluster: None,
            seed: 0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_pairs_per_cluster == Some(0) {
            return Err(Error::InvalidConfig("max_pairs_per_cluster must be >= 1".into()));
        }
        Ok(())
    }
}

/// One line of an asset map file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRecord {
    pub target_id: String,
    pub content_ref_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_style_ref_id: Option<String>,
}

pub type AssetMap = BTreeMap<String, AssetRecord>;

pub fn read_assets(path: &Path) -> Result<AssetMap> {
    let mut map = AssetMap::new();
    for record in read_ndjson::<AssetRecord>(path)? {
        if map.contains_key(&record.target_id) {
            return Err(Error::DuplicateId(record.target_id));
        }
        map.insert(record.target_id.clone(), record);
    }
    Ok(map)
}

/// Target id to content reference id.
pub fn content_map(assets: &AssetMap) -> BTreeMap<String, String> {
    assets
        .iter()
        .map(|(t, a)| (t.clone(), a.content_ref_id.clone()))
        .collect()
}

/// Decodes the k-th ordered pair of `n` items, skipping the diagonal.
fn ordered_pair(k: usize, n: usize) -> (usize, usize) {
    let i = k / (n - 1);
    let r = k % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// Ordered-pair triplets for one cluster, sorted by triplet id.
///
/// With a cap below `n(n-1)` a seeded uniform sample of exactly `cap` pairs
/// is drawn; the sampling stream is derived from the seed and cluster id.
pub fn match_cluster_pairs(
    cluster_id: &str,
    members: &[String],
    content_map: &BTreeMap<String, String>,
    source: TripletSource,
    cfg: &MatchConfig,
) -> Result<Vec<Triplet>> {
    cfg.validate()?;
    let mut distinct = BTreeSet::new();
    for m in members {
        if !distinct.insert(m.as_str()) {
            return Err(Error::DuplicateId(m.clone()));
        }
    }
    let missing: Vec<String> = members
        .iter()
        .filter(|m| !content_map.contains_key(m.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAssets { ids: missing });
    }

    let n = members.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let total = n * (n - 1);
    let picks: Vec<usize> = match cfg.max_pairs_per_cluster {
        Some(cap) if cap < total => {
            permutation_prefix(total, cap, derive_seed(cfg.seed, &format!("pairs/{cluster_id}")))
        }
        _ => (0..total).collect(),
    };
    let mut out: Vec<Triplet> = picks
        .into_iter()
        .map(|k| {
            let (s, t) = ordered_pair(k, n);
            let target = &members[t];
            Triplet::new(
                members[s].clone(),
                content_map[target].clone(),
                target.clone(),
                source,
                cluster_id,
                DEFAULT_PROMPT,
            )
        })
        .collect();
    out.sort_by(|a, b| a.triplet_id.cmp(&b.triplet_id));
    Ok(out)
}

fn sort_dedup(triplets: impl IntoIterator<Item = Triplet>) -> Vec<Triplet> {
    let by_id: BTreeMap<String, Triplet> = triplets.into_iter().map(|t| (t.triplet_id.clone(), t)).collect();
    by_id.into_values().collect()
}

/// Pairwise triplets over every cluster of `catalog`.
pub fn build_collected(
    catalog: &ImageCatalog,
    content_map: &BTreeMap<String, String>,
    cfg: &MatchConfig,
) -> Result<Vec<Triplet>> {
    if catalog.clusters.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if cfg.mode != MatchMode::Pairwise {
        return Err(Error::InvalidConfig(
            "collected triplets only support pairwise matching".into(),
        ));
    }
    let mut all = Vec::new();
    let mut missing = Vec::new();
    for (cluster_id, members) in &catalog.clusters {
        match match_cluster_pairs(cluster_id, members, content_map, TripletSource::Collected, cfg) {
            Ok(triplets) => all.extend(triplets),
            Err(Error::MissingAssets { ids }) => missing.extend(ids),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingAssets { ids: missing });
    }
    Ok(sort_dedup(all))
}

/// Synthetic triplets built from realism-converted content references and,
/// depending on the mode, generated style references.
pub fn build_synthetic(catalog: &ImageCatalog, assets: &AssetMap, cfg: &MatchConfig) -> Result<Vec<Triplet>> {
    if catalog.clusters.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    cfg.validate()?;
    let mut missing = Vec::new();
    for members in catalog.clusters.values() {
        for t in members {
            match assets.get(t) {
                None => missing.push(t.clone()),
                Some(a) if cfg.mode.generated() && a.generated_style_ref_id.is_none() => missing.push(t.clone()),
                Some(a) => {
                    if let Some(rec) = catalog.get(&a.content_ref_id) {
                        if rec.kind != ImageKind::ContentRef {
                            return Err(Error::InvalidConfig(format!(
                                "asset {} for target {t} is not a content reference",
                                a.content_ref_id
                            )));
                        }
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingAssets { ids: missing });
    }

    let contents = content_map(assets);
    let mut all = Vec::new();
    for (cluster_id, members) in &catalog.clusters {
        if cfg.mode.pairwise() {
            all.extend(match_cluster_pairs(
                cluster_id,
                members,
                &contents,
                TripletSource::Synthetic,
                cfg,
            )?);
        }
        if cfg.mode.generated() {
            for t in members {
                let a = &assets[t];
                let style = a.generated_style_ref_id.as_deref().expect("checked above");
                all.push(Triplet::new(
                    style,
                    a.content_ref_id.clone(),
                    t.clone(),
                    TripletSource::Synthetic,
                    cluster_id.clone(),
                    DEFAULT_PROMPT,
                ));
            }
        }
    }
    Ok(sort_dedup(all))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub high: usize,
    pub low: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    pub fn of(manifest: &[Triplet]) -> Self {
        let mut counts = LabelCounts::default();
        for t in manifest {
            match t.consistency {
                Consistency::High => counts.high += 1,
                Consistency::Low => counts.low += 1,
                Consistency::Unlabeled => counts.unlabeled += 1,
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelOutcome {
    pub manifest: Vec<Triplet>,
    pub counts: LabelCounts,
    /// Triplet ids in the log that the manifest does not contain.
    pub unknown: Vec<String>,
}

/// Sets each triplet's consistency from the last-write-wins label log.
pub fn apply_labels(manifest: &[Triplet], labels: &[LabelRecord]) -> LabelOutcome {
    let latest = resolve_labels(labels);
    let ids: BTreeSet<&str> = manifest.iter().map(|t| t.triplet_id.as_str()).collect();
    let unknown: Vec<String> = latest.keys().filter(|id| !ids.contains(id.as_str())).cloned().collect();
    for id in &unknown {
        log::warn!("label for unknown triplet {id}");
    }
    let manifest: Vec<Triplet> = manifest
        .iter()
        .map(|t| {
            let mut t = t.clone();
            if let Some((label, _)) = latest.get(&t.triplet_id) {
                t.consistency = (*label).into();
            }
            t
        })
        .collect();
    let counts = LabelCounts::of(&manifest);
    LabelOutcome {
        manifest,
        counts,
        unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{ImageRecord, Label};
    use proptest::prelude::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn identity_content(members: &[String]) -> BTreeMap<String, String> {
        members.iter().map(|m| (m.clone(), format!("c_{m}"))).collect()
    }

    fn catalog(sizes: &[usize]) -> ImageCatalog {
        let records = sizes.iter().enumerate().flat_map(|(c, &n)| {
            (0..n).map(move |i| ImageRecord {
                id: format!("k{c}_{i}"),
                path: format!("targets/k{c}_{i}.png"),
                width: 8,
                height: 8,
                kind: ImageKind::StylizedTarget,
                style_cluster: Some(format!("k{c}")),
                caption_id: None,
            })
        });
        ImageCatalog::from_records(records).unwrap()
    }

    fn assets_for(cat: &ImageCatalog, generated: bool) -> AssetMap {
        cat.clusters
            .values()
            .flatten()
            .map(|t| {
                (
                    t.clone(),
                    AssetRecord {
                        target_id: t.clone(),
                        content_ref_id: format!("real_{t}"),
                        generated_style_ref_id: generated.then(|| format!("gen_{t}")),
                    },
                )
            })
            .collect()
    }

    /// Brute-force enumeration of ordered pairs (s, t), s != t.
    fn brute_pairs(members: &[String]) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for s in members {
            for t in members {
                if s != t {
                    out.insert((s.clone(), t.clone()));
                }
            }
        }
        out
    }

    #[test]
    fn four_members_give_twelve_pairs() {
        let m = ids("a", 4);
        let out = match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &MatchConfig::default()).unwrap();
        assert_eq!(out.len(), 12);
        let got: BTreeSet<_> = out.iter().map(|t| (t.style_ref.clone(), t.target.clone())).collect();
        assert_eq!(got, brute_pairs(&m));
        assert!(out.iter().all(|t| t.content_ref == format!("c_{}", t.target)));
        assert!(out.windows(2).all(|w| w[0].triplet_id < w[1].triplet_id));
    }

    #[test]
    fn singleton_cluster_has_no_pairs() {
        let m = ids("a", 1);
        let out = match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &MatchConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn capped_sampling_is_exact_and_repeatable() {
        let m = ids("a", 10);
        let cfg = MatchConfig {
            max_pairs_per_cluster: Some(20),
            seed: 7,
            ..Default::default()
        };
        let a = match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &cfg).unwrap();
        let b = match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &cfg).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(
            crate::datamodel::to_ndjson(&a).unwrap(),
            crate::datamodel::to_ndjson(&b).unwrap()
        );
        let distinct: BTreeSet<_> = a.iter().map(|t| &t.triplet_id).collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn seeds_cover_every_pair() {
        let m = ids("a", 5);
        let mut union = BTreeSet::new();
        for seed in 0..100 {
            let cfg = MatchConfig {
                max_pairs_per_cluster: Some(3),
                seed,
                ..Default::default()
            };
            for t in match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &cfg).unwrap() {
                union.insert((t.style_ref, t.target));
            }
        }
        assert_eq!(union, brute_pairs(&m));
    }

    #[test]
    fn missing_content_is_named() {
        let m = ids("a", 3);
        let mut cm = identity_content(&m);
        cm.remove("a1");
        match match_cluster_pairs("k", &m, &cm, TripletSource::Collected, &MatchConfig::default()).unwrap_err() {
            Error::MissingAssets { ids } => assert_eq!(ids, vec!["a1".to_string()]),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn collected_counts() {
        let cat = catalog(&[3, 2]);
        let cm = content_map(&assets_for(&cat, false));
        assert_eq!(build_collected(&cat, &cm, &MatchConfig::default()).unwrap().len(), 8);

        let singles = catalog(&[1; 30]);
        let cm = content_map(&assets_for(&singles, false));
        assert!(build_collected(&singles, &cm, &MatchConfig::default()).unwrap().is_empty());

        let cat = catalog(&[4, 4, 4]);
        let cm = content_map(&assets_for(&cat, false));
        let cfg = MatchConfig {
            max_pairs_per_cluster: Some(5),
            ..Default::default()
        };
        let out = build_collected(&cat, &cm, &cfg).unwrap();
        assert_eq!(out.len(), 15);
        let all = build_collected(&cat, &cm, &MatchConfig::default()).unwrap();
        let all_ids: BTreeSet<_> = all.iter().map(|t| &t.triplet_id).collect();
        assert!(out.iter().all(|t| all_ids.contains(&t.triplet_id)));
        assert!(out.iter().all(|t| t.consistency == Consistency::Unlabeled));
    }

    #[test]
    fn collected_requires_clusters() {
        let empty = ImageCatalog::default();
        assert!(matches!(
            build_collected(&empty, &BTreeMap::new(), &MatchConfig::default()),
            Err(Error::EmptyCatalog)
        ));
    }

    #[test]
    fn synthetic_modes() {
        let three = catalog(&[1, 1, 1]);
        let cfg = MatchConfig {
            mode: MatchMode::GeneratedStyleRef,
            ..Default::default()
        };
        let out = build_synthetic(&three, &assets_for(&three, true), &cfg).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|t| t.style_ref.starts_with("gen_") && t.source == TripletSource::Synthetic));

        let five = catalog(&[5]);
        let out = build_synthetic(&five, &assets_for(&five, false), &MatchConfig::default()).unwrap();
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|t| t.content_ref.starts_with("real_")));

        let two = catalog(&[2]);
        let both = MatchConfig {
            mode: MatchMode::Both,
            ..Default::default()
        };
        assert_eq!(build_synthetic(&two, &assets_for(&two, true), &both).unwrap().len(), 4);
    }

    #[test]
    fn synthetic_lists_uncovered_targets() {
        let cat = catalog(&[2, 1]);
        let mut assets = assets_for(&cat, false);
        assets.remove("k0_1");
        match build_synthetic(&cat, &assets, &MatchConfig::default()).unwrap_err() {
            Error::MissingAssets { ids } => assert_eq!(ids, vec!["k0_1".to_string()]),
            e => panic!("{e:?}"),
        }
        let cfg = MatchConfig {
            mode: MatchMode::GeneratedStyleRef,
            ..Default::default()
        };
        match build_synthetic(&cat, &assets_for(&cat, false), &cfg).unwrap_err() {
            Error::MissingAssets { ids } => assert_eq!(ids.len(), 3),
            e => panic!("{e:?}"),
        }
    }

    fn label(id: &str, l: Label, ts: i64) -> LabelRecord {
        LabelRecord {
            triplet_id: id.into(),
            label: l,
            curator: "cur".into(),
            timestamp: ts,
        }
    }

    fn ten() -> Vec<Triplet> {
        let m = ids("a", 5);
        let mut out = match_cluster_pairs("k", &m, &identity_content(&m), TripletSource::Collected, &MatchConfig::default()).unwrap();
        out.truncate(10);
        out
    }

    #[test]
    fn label_counts() {
        let m = ten();
        let log = vec![
            label(&m[0].triplet_id, Label::High, 1),
            label(&m[1].triplet_id, Label::High, 1),
            label(&m[2].triplet_id, Label::High, 1),
            label(&m[3].triplet_id, Label::Low, 1),
        ];
        let out = apply_labels(&m, &log);
        assert_eq!(out.counts, LabelCounts { high: 3, low: 1, unlabeled: 6 });
        assert!(out.unknown.is_empty());
    }

    #[test]
    fn later_and_tied_labels_win() {
        let m = ten();
        let id = &m[0].triplet_id;
        let out = apply_labels(&m, &[label(id, Label::High, 5), label(id, Label::Low, 9)]);
        assert_eq!(out.manifest[0].consistency, Consistency::Low);
        let out = apply_labels(&m, &[label(id, Label::High, 5), label(id, Label::Low, 5)]);
        assert_eq!(out.manifest[0].consistency, Consistency::Low);
        let out = apply_labels(&m, &[label(id, Label::Low, 5), label(id, Label::High, 5)]);
        assert_eq!(out.manifest[0].consistency, Consistency::High);
    }

    #[test]
    fn unknown_labels_are_reported_not_fatal() {
        let m = ten();
        let out = apply_labels(&m, &[label("t-gone", Label::High, 1)]);
        assert_eq!(out.unknown, vec!["t-gone".to_string()]);
        assert_eq!(out.counts.unlabeled, 10);
    }

    proptest! {
        #[test]
        fn uncapped_count_matches_enumeration(sizes in prop::collection::vec(1usize..20, 1..6)) {
            let cat = catalog(&sizes);
            let cm = content_map(&assets_for(&cat, false));
            let out = build_collected(&cat, &cm, &MatchConfig::default()).unwrap();
            let expected: usize = cat.clusters.values().map(|m| brute_pairs(m).len()).sum();
            prop_assert_eq!(out.len(), expected);
            prop_assert!(out.iter().all(|t| t.style_ref != t.target));
        }

        #[test]
        fn applying_labels_is_idempotent(picks in prop::collection::vec((0usize..10, any::<bool>(), 0i64..4), 0..30)) {
            let m = ten();
            let log: Vec<_> = picks.iter().map(|&(i, high, ts)| label(&m[i].triplet_id, if high { Label::High } else { Label::Low }, ts)).collect();
            let once = apply_labels(&m, &log);
            let twice = apply_labels(&once.manifest, &log);
            prop_assert_eq!(once, twice);
        }
    }
}
