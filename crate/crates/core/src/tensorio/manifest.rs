use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::FormatError;

/// Expression classes. The declaration order is the canonical class order
/// used for tie-breaking and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Happy,
    Sad,
    Disgust,
    Surprise,
    Fear,
    Angry,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::Happy,
        Label::Sad,
        Label::Disgust,
        Label::Surprise,
        Label::Fear,
        Label::Angry,
        Label::Neutral,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Label::Happy => "HA",
            Label::Sad => "SA",
            Label::Disgust => "DI",
            Label::Surprise => "SU",
            Label::Fear => "FE",
            Label::Angry => "AN",
            Label::Neutral => "NE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.code() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_id: String,
    pub label: Label,
    pub mesh_path: Option<PathBuf>,
    /// Stream name (e.g. `vgg.depth`) to FMAP path.
    pub tensor_paths: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Parses every line independently. Blank lines and `#` comments produce
/// nothing; every other line yields an entry or an error, tagged with its
/// one-based line number. Duplicate sample ids are reported on the later line.
pub fn parse_manifest_lines(text: &str) -> Vec<(usize, Result<ManifestEntry, FormatError>)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let parsed = parse_entry(trimmed, line).and_then(|e| {
            if seen.insert(e.sample_id.clone()) {
                Ok(e)
            } else {
                Err(FormatError::DuplicateSampleId {
                    line,
                    sample_id: e.sample_id,
                })
            }
        });
        out.push((line, parsed));
    }
    out
}

fn parse_entry(line_text: &str, line: usize) -> Result<ManifestEntry, FormatError> {
    let fields: Vec<&str> = line_text.split('\t').collect();
    let missing = |field: &'static str| FormatError::MissingField { line, field };
    let sample_id = fields.first().filter(|s| !s.is_empty()).ok_or(missing("sample_id"))?;
    let subject_id = fields.get(1).filter(|s| !s.is_empty()).ok_or(missing("subject_id"))?;
    let label_text = fields.get(2).filter(|s| !s.is_empty()).ok_or(missing("label"))?;
    let label = label_text
        .parse::<Label>()
        .map_err(|label| FormatError::UnknownLabel { line, label })?;
    let mesh_field = fields.get(3).ok_or(missing("mesh"))?;
    let mesh_path = match mesh_field.strip_prefix("mesh=") {
        Some("-") => None,
        Some(p) if !p.is_empty() => Some(PathBuf::from(p)),
        _ => return Err(missing("mesh")),
    };
    let mut tensor_paths = BTreeMap::new();
    let mut paths: HashSet<PathBuf> = mesh_path.iter().cloned().collect();
    for field in &fields[4..] {
        let (name, path) = field
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| FormatError::Parse {
                line,
                message: format!("stream field {field:?} is not name=path"),
            })?;
        let path = PathBuf::from(path);
        if !paths.insert(path.clone()) {
            return Err(FormatError::DuplicatePath { line, path });
        }
        if tensor_paths.insert(name.to_string(), path).is_some() {
            return Err(FormatError::Parse {
                line,
                message: format!("stream {name} listed twice"),
            });
        }
    }
    Ok(ManifestEntry {
        sample_id: sample_id.to_string(),
        subject_id: subject_id.to_string(),
        label,
        mesh_path,
        tensor_paths,
    })
}

impl DatasetManifest {
    /// Strict parse: the first bad line aborts.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let entries = parse_manifest_lines(text)
            .into_iter()
            .map(|(_, r)| r)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# sample_id\tsubject_id\tlabel\tmesh=<path|->\t[stream=path...]\n");
        for e in &self.entries {
            let mesh = e
                .mesh_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{}\t{}\t{}\tmesh={}",
                e.sample_id, e.subject_id, e.label, mesh
            ));
            for (name, path) in &e.tensor_paths {
                out.push_str(&format!("\t{}={}", name, path.display()));
            }
            out.push('\n');
        }
        out
    }

    /// Makes relative paths absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for e in &mut self.entries {
            if let Some(p) = &mut e.mesh_path {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            for p in e.tensor_paths.values_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    /// Class set present in the manifest, in canonical order.
    pub fn classes(&self) -> Vec<Label> {
        let mut set: Vec<Label> = self.entries.iter().map(|e| e.label).collect();
        set.sort();
        set.dedup();
        set
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a manifest and resolves relative paths against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut manifest = DatasetManifest::parse(&text)?;
    if let Some(dir) = path.parent() {
        manifest.resolve_paths(dir);
    }
    Ok(manifest)
}
