//! Corpus layout on disk, the development/evaluation split and the
//! enrollment-versus-probe pair lists.
//!
//! Directory layout: `<root>/<user_id>/<kind>_<session>_<index>.svc` with
//! `kind` one of `genuine` or `forgery`. A `manifest.tsv` at the root, when
//! present, replaces directory scanning; each non-comment line is
//! `path<TAB>user<TAB>kind<TAB>session<TAB>index` with `path` relative to the
//! root.
//!
//! Within a user, forgeries are ordered by (session, index); test genuine
//! signatures likewise. The first `n` of each ordered list are used.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{emit_svc, parse_svc, SignatureKey, SignatureKind, SignatureRecord};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolCounts {
    /// Session-1 genuine signatures used as references.
    pub enrollment: usize,
    /// Genuine probes from later sessions.
    pub test_genuine: usize,
    pub forgeries: usize,
}

impl Default for ProtocolCounts {
    fn default() -> Self {
        ProtocolCounts {
            enrollment: 4,
            test_genuine: 12,
            forgeries: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Development,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserSignatures {
    pub enrollment: Vec<SignatureRecord>,
    pub test_genuine: Vec<SignatureRecord>,
    pub forgeries: Vec<SignatureRecord>,
}

impl UserSignatures {
    /// Genuine probes followed by forgeries; probe indices refer to this order.
    pub fn probes(&self) -> impl Iterator<Item = &SignatureRecord> {
        self.test_genuine.iter().chain(&self.forgeries)
    }

    pub fn all(&self) -> impl Iterator<Item = &SignatureRecord> {
        self.enrollment.iter().chain(self.probes())
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub counts: ProtocolCounts,
    pub development_users: BTreeSet<String>,
    pub evaluation_users: BTreeSet<String>,
    pub users: BTreeMap<String, UserSignatures>,
}

impl DatasetSplit {
    pub fn partition_users(&self, partition: Partition) -> &BTreeSet<String> {
        match partition {
            Partition::Development => &self.development_users,
            Partition::Evaluation => &self.evaluation_users,
        }
    }

    /// Every record of the partition, in canonical user order.
    pub fn records(&self, partition: Partition) -> impl Iterator<Item = &SignatureRecord> {
        self.partition_users(partition)
            .iter()
            .flat_map(move |u| self.users[u].all())
    }
}

/// Splits `records` by user: the first `n_dev_users` ids in lexicographic
/// order form the development partition, the rest evaluation.
pub fn build_split(records: &[SignatureRecord], n_dev_users: usize, counts: ProtocolCounts) -> Result<DatasetSplit> {
    let mut by_user: BTreeMap<&str, Vec<&SignatureRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(r.key.user.as_str()).or_default().push(r);
    }
    if n_dev_users > by_user.len() {
        return Err(Error::Protocol(format!(
            "{n_dev_users} development users requested, corpus has {}",
            by_user.len()
        )));
    }

    let mut users = BTreeMap::new();
    for (&user, recs) in &by_user {
        let mut enrollment: Vec<&SignatureRecord> = recs
            .iter()
            .copied()
            .filter(|r| r.key.kind == SignatureKind::Genuine && r.key.session == 1)
            .collect();
        let mut genuine: Vec<&SignatureRecord> = recs
            .iter()
            .copied()
            .filter(|r| r.key.kind == SignatureKind::Genuine && r.key.session > 1)
            .collect();
        let mut forgeries: Vec<&SignatureRecord> = recs
            .iter()
            .copied()
            .filter(|r| r.key.kind == SignatureKind::SkilledForgery)
            .collect();
        for list in [&mut enrollment, &mut genuine, &mut forgeries] {
            list.sort_by(|a, b| a.key.cmp(&b.key));
        }
        let check = |have: usize, want: usize, what: &str| {
            if have < want {
                Err(Error::InsufficientSignatures {
                    user: user.to_string(),
                    detail: format!("{have} {what}, protocol needs {want}"),
                })
            } else {
                Ok(())
            }
        };
        check(enrollment.len(), counts.enrollment, "session-1 genuine signatures")?;
        check(genuine.len(), counts.test_genuine, "genuine signatures from sessions 2-4")?;
        check(forgeries.len(), counts.forgeries, "skilled forgeries")?;
        let take = |v: Vec<&SignatureRecord>, n: usize| v.into_iter().take(n).cloned().collect();
        users.insert(
            user.to_string(),
            UserSignatures {
                enrollment: take(enrollment, counts.enrollment),
                test_genuine: take(genuine, counts.test_genuine),
                forgeries: take(forgeries, counts.forgeries),
            },
        );
    }

    let ids: Vec<String> = users.keys().cloned().collect();
    Ok(DatasetSplit {
        counts,
        development_users: ids[..n_dev_users].iter().cloned().collect(),
        evaluation_users: ids[n_dev_users..].iter().cloned().collect(),
        users,
    })
}

/// One enrollment-versus-probe comparison.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub user: String,
    pub enrollment_index: usize,
    pub probe_index: usize,
    pub enrollment: SignatureKey,
    pub probe: SignatureKey,
    /// 1 for genuine-genuine, 0 for genuine-forgery.
    pub label: u8,
}

impl Pair {
    pub fn is_genuine(&self) -> bool {
        self.label == 1
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairList {
    pub pairs: Vec<Pair>,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn genuine_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_genuine()).count()
    }

    pub fn impostor_count(&self) -> usize {
        self.len() - self.genuine_count()
    }

    pub fn users(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.user.as_str()).collect()
    }
}

/// Skilled-forgery protocol: every enrollment signature against every test
/// genuine signature (label 1) and every skilled forgery (label 0) of the
/// same user, ordered by (user, enrollment index, probe index).
pub fn build_pairs(split: &DatasetSplit, partition: Partition) -> PairList {
    let mut pairs = Vec::new();
    for user in split.partition_users(partition) {
        let sigs = &split.users[user];
        let n_genuine = sigs.test_genuine.len();
        for (e, enr) in sigs.enrollment.iter().enumerate() {
            for (p, probe) in sigs.probes().enumerate() {
                pairs.push(Pair {
                    user: user.clone(),
                    enrollment_index: e,
                    probe_index: p,
                    enrollment: enr.key.clone(),
                    probe: probe.key.clone(),
                    label: u8::from(p < n_genuine),
                });
            }
        }
    }
    PairList { pairs }
}

/// Random-forgery variant: each enrollment signature of a user is compared
/// with the first test genuine signature of every other user in the same
/// partition (all label 0). Combined with the genuine pairs of
/// [`build_pairs`] it gives a random-forgery evaluation.
pub fn build_random_forgery_pairs(split: &DatasetSplit, partition: Partition) -> PairList {
    let users: Vec<&String> = split.partition_users(partition).iter().collect();
    let mut pairs = Vec::new();
    for &user in &users {
        let sigs = &split.users[user];
        for (e, enr) in sigs.enrollment.iter().enumerate() {
            let mut p = 0;
            for &other in users.iter().filter(|&&o| o != user) {
                if let Some(probe) = split.users[other].test_genuine.first() {
                    pairs.push(Pair {
                        user: user.clone(),
                        enrollment_index: e,
                        probe_index: p,
                        enrollment: enr.key.clone(),
                        probe: probe.key.clone(),
                        label: 0,
                    });
                    p += 1;
                }
            }
        }
    }
    PairList { pairs }
}

/// Genuine pairs of [`build_pairs`] plus the random-forgery pairs of
/// [`build_random_forgery_pairs`], with forgery probe indices shifted past the
/// genuine ones so per-probe aggregation stays unambiguous.
pub fn build_random_forgery_trials(split: &DatasetSplit, partition: Partition) -> PairList {
    let mut pairs: Vec<Pair> = build_pairs(split, partition)
        .pairs
        .into_iter()
        .filter(Pair::is_genuine)
        .collect();
    let offset = split.counts.test_genuine;
    pairs.extend(build_random_forgery_pairs(split, partition).pairs.into_iter().map(|mut p| {
        p.probe_index += offset;
        p
    }));
    pairs.sort();
    PairList { pairs }
}

fn parse_file_name(name: &str) -> Option<(SignatureKind, u8, u32)> {
    let stem = name.strip_suffix(".svc")?;
    let mut parts = stem.split('_');
    let kind = SignatureKind::from_tag(parts.next()?)?;
    let session = parts.next()?.parse().ok()?;
    let index = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((kind, session, index))
}

pub fn record_path(root: &Path, key: &SignatureKey) -> PathBuf {
    root.join(&key.user)
        .join(format!("{}_{}_{}.svc", key.kind.tag(), key.session, key.index))
}

fn read_record(path: &Path, key: SignatureKey) -> Result<SignatureRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_svc(&bytes, key).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn read_manifest(root: &Path, manifest: &Path) -> Result<Vec<SignatureRecord>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            message: format!("{}: {msg}", manifest.display()),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad("expected path, user, kind, session, index"));
        }
        let kind = SignatureKind::from_tag(cols[2]).ok_or_else(|| bad("unknown kind"))?;
        let key = SignatureKey {
            user: cols[1].to_string(),
            kind,
            session: cols[3].parse().map_err(|_| bad("bad session"))?,
            index: cols[4].parse().map_err(|_| bad("bad index"))?,
        };
        out.push(read_record(&root.join(cols[0]), key)?);
    }
    Ok(out)
}

/// Loads every signature under `root`, sorted by key.
pub fn load_corpus(root: &Path) -> Result<Vec<SignatureRecord>> {
    let manifest = root.join(MANIFEST_FILE);
    let mut records = if manifest.is_file() {
        read_manifest(root, &manifest)?
    } else {
        let mut out = Vec::new();
        let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            let dir = entry.path();
            if !dir.is_dir() {
                continue;
            }
            let user = entry.file_name().to_string_lossy().into_owned();
            for file in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let file = file.map_err(|e| Error::io(&dir, e))?;
                let name = file.file_name().to_string_lossy().into_owned();
                if let Some((kind, session, index)) = parse_file_name(&name) {
                    let key = SignatureKey {
                        user: user.clone(),
                        kind,
                        session,
                        index,
                    };
                    out.push(read_record(&file.path(), key)?);
                }
            }
        }
        out
    };
    records.sort_by(|a, b| a.key.cmp(&b.key));
    if let Some(w) = records.windows(2).find(|w| w[0].key == w[1].key) {
        return Err(Error::Protocol(format!("duplicate signature {}", w[0].key)));
    }
    Ok(records)
}

/// Writes records in the directory layout; returns the number of files.
pub fn write_corpus(root: &Path, records: &[SignatureRecord]) -> Result<usize> {
    for r in records {
        let path = record_path(root, &r.key);
        let dir = path.parent().expect("record path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(&path, emit_svc(r)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Sample;

    fn record(user: &str, kind: SignatureKind, session: u8, index: u32) -> SignatureRecord {
        let samples = (0..3)
            .map(|n| Sample {
                x: n,
                y: 2 * n,
                pressure: 100,
                timestamp: 10 * n,
                pen_down: true,
            })
            .collect();
        SignatureRecord::new(
            SignatureKey {
                user: user.into(),
                kind,
                session,
                index,
            },
            samples,
            false,
        )
        .unwrap()
    }

    fn corpus(n_users: usize, counts: ProtocolCounts) -> Vec<SignatureRecord> {
        let mut out = Vec::new();
        for u in 0..n_users {
            let user = format!("u{u:03}");
            for i in 0..counts.enrollment {
                out.push(record(&user, SignatureKind::Genuine, 1, i as u32 + 1));
            }
            for i in 0..counts.test_genuine {
                out.push(record(&user, SignatureKind::Genuine, 2 + (i % 3) as u8, i as u32 + 1));
            }
            for i in 0..counts.forgeries {
                out.push(record(&user, SignatureKind::SkilledForgery, 1 + (i % 4) as u8, i as u32 + 1));
            }
        }
        out
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let counts = ProtocolCounts::default();
        let split = build_split(&corpus(10, counts), 6, counts).unwrap();
        assert_eq!(split.development_users.len(), 6);
        assert_eq!(split.evaluation_users.len(), 4);
        assert!(split.development_users.is_disjoint(&split.evaluation_users));
        assert!(split.users.values().all(|u| u.enrollment.iter().all(|r| r.key.session == 1)));
        assert!(split
            .users
            .values()
            .all(|u| u.test_genuine.iter().all(|r| r.key.session > 1 && r.key.kind == SignatureKind::Genuine)));
        let dev = build_pairs(&split, Partition::Development);
        assert_eq!(dev.genuine_count(), 288);
        assert_eq!(dev.impostor_count(), 288);
        let eval = build_pairs(&split, Partition::Evaluation);
        assert!(dev.users().is_disjoint(&eval.users()));
    }

    #[test]
    fn no_development_users() {
        let counts = ProtocolCounts::default();
        let split = build_split(&corpus(3, counts), 0, counts).unwrap();
        assert!(split.development_users.is_empty());
        assert_eq!(split.evaluation_users.len(), 3);
        assert!(build_pairs(&split, Partition::Development).is_empty());
    }

    #[test]
    fn one_user_pairs() {
        let counts = ProtocolCounts::default();
        let split = build_split(&corpus(1, counts), 1, counts).unwrap();
        let pairs = build_pairs(&split, Partition::Development);
        assert_eq!((pairs.genuine_count(), pairs.impostor_count()), (48, 48));
        // ordering: (enrollment index, probe index) lexicographic
        let order: Vec<(usize, usize)> = pairs.pairs.iter().map(|p| (p.enrollment_index, p.probe_index)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
        for p in &pairs.pairs {
            assert_eq!(p.enrollment.user, p.probe.user);
            assert_eq!(p.label == 1, p.probe.kind == SignatureKind::Genuine);
        }
    }

    #[test]
    fn custom_counts() {
        let counts = ProtocolCounts {
            enrollment: 2,
            test_genuine: 3,
            forgeries: 3,
        };
        let split = build_split(&corpus(7, counts), 7, counts).unwrap();
        let pairs = build_pairs(&split, Partition::Development);
        assert_eq!((pairs.genuine_count(), pairs.impostor_count()), (42, 42));
    }

    #[test]
    fn insufficient_signatures_named() {
        let counts = ProtocolCounts::default();
        let mut recs = corpus(3, counts);
        recs.retain(|r| !(r.key.user == "u001" && r.key.kind == SignatureKind::SkilledForgery && r.key.index == 5));
        match build_split(&recs, 1, counts).unwrap_err() {
            Error::InsufficientSignatures { user, .. } => assert_eq!(user, "u001"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn random_forgery_pairs() {
        let counts = ProtocolCounts::default();
        let split = build_split(&corpus(5, counts), 2, counts).unwrap();
        let pairs = build_random_forgery_pairs(&split, Partition::Evaluation);
        assert_eq!(pairs.len(), 3 * 4 * 2);
        assert!(pairs.pairs.iter().all(|p| p.label == 0 && p.enrollment.user != p.probe.user));
        let trials = build_random_forgery_trials(&split, Partition::Evaluation);
        assert_eq!((trials.genuine_count(), trials.impostor_count()), (4 * 12 * 3, 3 * 4 * 2));
        let mut ids: Vec<_> = trials.pairs.iter().map(|p| (&p.user, p.enrollment_index, p.probe_index)).collect();
        ids.dedup();
        assert_eq!(ids.len(), trials.len());
    }

    #[test]
    fn directory_and_manifest_loading() {
        let dir = tempfile::tempdir().unwrap();
        let counts = ProtocolCounts::default();
        let recs = corpus(2, counts);
        write_corpus(dir.path(), &recs).unwrap();
        fs::write(dir.path().join("README"), "not a signature").unwrap();
        let mut loaded = load_corpus(dir.path()).unwrap();
        let mut expected = recs.clone();
        expected.sort_by(|a, b| a.key.cmp(&b.key));
        assert_eq!(loaded, expected);

        // a manifest restricts and relabels
        let manifest = "# path\tuser\tkind\tsession\tindex\nu000/genuine_1_1.svc\talice\tgenuine\t1\t7\n";
        fs::write(dir.path().join(MANIFEST_FILE), manifest).unwrap();
        loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].key.user, "alice");
        assert_eq!(loaded[0].key.index, 7);
    }

    #[test]
    fn file_names() {
        assert_eq!(parse_file_name("genuine_2_11.svc"), Some((SignatureKind::Genuine, 2, 11)));
        assert_eq!(parse_file_name("forgery_1_3.svc"), Some((SignatureKind::SkilledForgery, 1, 3)));
        assert_eq!(parse_file_name("genuine_2.svc"), None);
        assert_eq!(parse_file_name("notes.txt"), None);
    }
}
