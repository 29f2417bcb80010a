//! Label files, boundary TSVs and manifests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{atomic_write, read_to_string};
use crate::error::{AlignError, Result};
use crate::eval::{BoundarySet, Segment};
use crate::lattice::{PhonemeSequence, Vocabulary};

pub const BOUNDARY_HEADER: &str = "phoneme\tstart_frame\tend_frame\tstart_sec\tend_sec";
pub const MANIFEST_HEADER: &str = "utt_id\tfeature_path\tlabel_path\tref_boundary_path";

/// Whitespace-separated phoneme tokens from the first non-empty line.
pub fn read_label_tokens(path: &Path) -> Result<Vec<String>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, line)) = lines.next() else {
        return Err(AlignError::format(path, "line 1: empty label file"));
    };
    if let Some((n, _)) = lines.next() {
        return Err(AlignError::format(path, format!("line {}: labels must fit on one line", n + 1)));
    }
    Ok(line.split_whitespace().map(str::to_string).collect())
}

pub fn read_labels(path: &Path, vocab: &Vocabulary) -> Result<PhonemeSequence> {
    let tokens = read_label_tokens(path)?;
    for t in &tokens {
        if vocab.id(t).is_none() {
            return Err(AlignError::format(path, format!("line 1: unknown phoneme `{t}`")));
        }
    }
    vocab.encode(&tokens)
}

pub fn write_labels(path: &Path, tokens: &[&str]) -> Result<()> {
    atomic_write(path, format!("{}\n", tokens.join(" ")).as_bytes())
}

pub fn boundaries_to_tsv(set: &BoundarySet, vocab: &Vocabulary) -> Result<String> {
    let mut out = String::from(BOUNDARY_HEADER);
    out.push('\n');
    for (i, seg) in set.segments().iter().enumerate() {
        let sym = vocab.symbol(seg.phoneme).ok_or(AlignError::PhonemeIdOutOfRange {
            id: seg.phoneme,
            size: vocab.len(),
        })?;
        out.push_str(&format!(
            "{sym}\t{}\t{}\t{:.6}\t{:.6}\n",
            seg.start_frame,
            seg.end_frame,
            set.start_sec(i),
            set.end_sec(i)
        ));
    }
    Ok(out)
}

pub fn write_boundaries(path: &Path, set: &BoundarySet, vocab: &Vocabulary) -> Result<()> {
    atomic_write(path, boundaries_to_tsv(set, vocab)?.as_bytes())
}

/// Parses a boundary TSV. Seconds columns must agree with the frame
/// columns at `frame_shift` to within their printed precision.
pub fn parse_boundaries(path: &Path, text: &str, frame_shift: f64, vocab: &Vocabulary) -> Result<BoundarySet> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == BOUNDARY_HEADER => {}
        _ => return Err(AlignError::format(path, format!("line 1: expected header `{BOUNDARY_HEADER}`"))),
    }
    let mut segments = Vec::new();
    for (n, line) in lines {
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(AlignError::format(path, format!("line {lineno}: expected 5 columns, found {}", cols.len())));
        }
        let phoneme = vocab
            .id(cols[0])
            .ok_or_else(|| AlignError::format(path, format!("line {lineno}: unknown phoneme `{}`", cols[0])))?;
        let int = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| AlignError::format(path, format!("line {lineno}: bad {what} `{s}`")))
        };
        let float = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|_| AlignError::format(path, format!("line {lineno}: bad {what} `{s}`")))
        };
        let start_frame = int(cols[1], "start_frame")?;
        let end_frame = int(cols[2], "end_frame")?;
        let start_sec = float(cols[3], "start_sec")?;
        let end_sec = float(cols[4], "end_sec")?;
        for (frame, sec) in [(start_frame, start_sec), (end_frame, end_sec)] {
            if (frame as f64 * frame_shift - sec).abs() > 1e-6 {
                return Err(AlignError::format(
                    path,
                    format!("line {lineno}: {sec} s disagrees with frame {frame} at {frame_shift} s/frame"),
                ));
            }
        }
        segments.push(Segment {
            phoneme,
            start_frame,
            end_frame,
        });
    }
    BoundarySet::new(segments, frame_shift).map_err(|e| AlignError::format(path, e.to_string()))
}

pub fn read_boundaries(path: &Path, frame_shift: f64, vocab: &Vocabulary) -> Result<BoundarySet> {
    parse_boundaries(path, &read_to_string(path)?, frame_shift, vocab)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub reference: Option<PathBuf>,
}

/// Reads a manifest; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.trim().is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("utt_id\t")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&cols.len()) {
            return Err(AlignError::format(path, format!("line {lineno}: expected 3 or 4 columns, found {}", cols.len())));
        }
        if !seen.insert(cols[0].to_string()) {
            return Err(AlignError::format(path, format!("line {lineno}: duplicate utt_id `{}`", cols[0])));
        }
        let resolve = |s: &str| -> Result<PathBuf> {
            let p = base.join(s);
            if !p.exists() {
                return Err(AlignError::format(path, format!("line {lineno}: missing file {}", p.display())));
            }
            Ok(p)
        };
        entries.push(ManifestEntry {
            utt_id: cols[0].to_string(),
            features: resolve(cols[1])?,
            labels: resolve(cols[2])?,
            reference: cols.get(3).filter(|s| !s.is_empty()).map(|s| resolve(s)).transpose()?,
        });
    }
    if entries.is_empty() {
        return Err(AlignError::format(path, "manifest lists no utterances"));
    }
    Ok(entries)
}

/// Writes entries verbatim; paths should be relative to the manifest's directory.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!("{}\t{}\t{}", e.utt_id, e.features.display(), e.labels.display()));
        if let Some(r) = &e.reference {
            out.push_str(&format!("\t{}", r.display()));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
