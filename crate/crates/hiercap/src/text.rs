//! Line-oriented UTF-8 corpus files.
//!
//! - manifest: `video_id TAB feature path` (relative to the manifest)
//! - captions: `video_id TAB space-separated tokens`
//! - vocabulary: one token per line; line number is the index
//! - boundaries: `video_id TAB segment starts TAB word boundaries`, each a
//!   comma-separated (possibly empty) list

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hiercap_core::vocab::{tokenize, Vocabulary};

use crate::error::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, what: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        what: what.into(),
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub path: PathBuf,
}

/// Entries with paths resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (line, l) in records(&read_to_string(path)?) {
        let (id, file) = l
            .split_once('\t')
            .ok_or_else(|| parse_err(path, line, "expected `video_id<TAB>path`"))?;
        if id.is_empty() || file.is_empty() {
            return Err(parse_err(path, line, "empty video id or path"));
        }
        if let Some(prev) = seen.insert(id.to_string(), line) {
            return Err(parse_err(path, line, format!("video `{id}` already listed on line {prev}")));
        }
        out.push(ManifestEntry {
            video_id: id.into(),
            path: base.join(file),
        });
    }
    if out.is_empty() {
        return Err(parse_err(path, 0, "manifest lists no videos"));
    }
    Ok(out)
}

pub fn format_manifest(entries: &[(String, String)]) -> String {
    entries.iter().fold(String::new(), |mut s, (id, p)| {
        let _ = writeln!(s, "{id}\t{p}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCaption {
    pub video_id: String,
    pub words: Vec<String>,
}

/// Captions lowercased and split on whitespace.
pub fn read_captions(path: &Path) -> Result<Vec<RawCaption>> {
    let mut out = Vec::new();
    for (line, l) in records(&read_to_string(path)?) {
        let (id, text) = l
            .split_once('\t')
            .ok_or_else(|| parse_err(path, line, "expected `video_id<TAB>caption`"))?;
        let words = tokenize(text);
        if id.is_empty() || words.is_empty() {
            return Err(parse_err(path, line, "empty video id or caption"));
        }
        out.push(RawCaption {
            video_id: id.into(),
            words,
        });
    }
    Ok(out)
}

pub fn format_captions(caps: &[RawCaption]) -> String {
    caps.iter().fold(String::new(), |mut s, c| {
        let _ = writeln!(s, "{}\t{}", c.video_id, c.words.join(" "));
        s
    })
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let tokens: Vec<String> = read_to_string(path)?
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect();
    Vocabulary::from_tokens(tokens).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn format_vocab(vocab: &Vocabulary) -> String {
    vocab.tokens().iter().fold(String::new(), |mut s, t| {
        let _ = writeln!(s, "{t}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryAnnotation {
    pub video_id: String,
    /// Frame index where each segment starts, beginning with 0.
    pub segment_starts: Vec<usize>,
    /// Word positions that open a new phrase (never 0).
    pub word_boundaries: Vec<usize>,
}

impl BoundaryAnnotation {
    /// Frame boundaries: segment starts other than the first frame.
    pub fn frame_boundaries(&self) -> Vec<usize> {
        self.segment_starts.iter().copied().filter(|&s| s > 0).collect()
    }
}

fn list(field: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    field
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn read_boundaries(path: &Path) -> Result<BTreeMap<String, BoundaryAnnotation>> {
    let mut out = BTreeMap::new();
    for (line, l) in records(&read_to_string(path)?) {
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line,
                "expected `video_id<TAB>segment starts<TAB>word boundaries`",
            ));
        }
        let bad = |e: std::num::ParseIntError| parse_err(path, line, format!("bad index list: {e}"));
        let ann = BoundaryAnnotation {
            video_id: fields[0].into(),
            segment_starts: list(fields[1]).map_err(bad)?,
            word_boundaries: list(fields[2]).map_err(bad)?,
        };
        if out.insert(ann.video_id.clone(), ann).is_some() {
            return Err(parse_err(path, line, format!("duplicate video `{}`", fields[0])));
        }
    }
    Ok(out)
}

pub fn format_boundaries(anns: &[BoundaryAnnotation]) -> String {
    anns.iter().fold(String::new(), |mut s, a| {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            a.video_id,
            join(&a.segment_starts),
            join(&a.word_boundaries)
        );
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let anns = vec![
            BoundaryAnnotation {
                video_id: "a".into(),
                segment_starts: vec![0, 4],
                word_boundaries: vec![3],
            },
            BoundaryAnnotation {
                video_id: "b".into(),
                segment_starts: vec![0],
                word_boundaries: vec![],
            },
        ];
        let p = dir.path().join("b.tsv");
        write_string(&p, &format_boundaries(&anns)).unwrap();
        let back = read_boundaries(&p).unwrap();
        assert_eq!(back["a"], anns[0]);
        assert_eq!(back["b"], anns[1]);
        assert_eq!(back["a"].frame_boundaries(), vec![4]);
    }

    #[test]
    fn manifest_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        write_string(&p, "a\tx.vfea\nb x.vfea\n").unwrap();
        match read_manifest(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        write_string(&p, "a\tx.vfea\na\ty.vfea\n").unwrap();
        assert!(read_manifest(&p).is_err());
    }

    #[test]
    fn captions_are_lowercased() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tsv");
        write_string(&p, "v1\tA Dog  Runs\n\nv2\tthe cat\n").unwrap();
        let caps = read_captions(&p).unwrap();
        assert_eq!(caps[0].words, ["a", "dog", "runs"]);
        assert_eq!(caps.len(), 2);
    }
}
