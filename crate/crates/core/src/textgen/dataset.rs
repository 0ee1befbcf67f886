use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base::ExampleId;
use crate::error::{Error, Result};

/// Separator placed between the two halves of a text pair before featurization.
pub const PAIR_SEPARATOR: &str = " [SEP] ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Text {
    Single(String),
    Pair(String, String),
}

impl Text {
    /// Text as seen by featurizers and miners.
    pub fn joined(&self) -> String {
        match self {
            Text::Single(t) => t.clone(),
            Text::Pair(a, b) => format!("{a}{PAIR_SEPARATOR}{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: ExampleId,
    pub text: Text,
    pub label: u32,
    /// Set by label-noise injection.
    pub flipped: Option<bool>,
    /// Set on injected copies; points at the example they were copied from.
    pub source_id: Option<ExampleId>,
}

/// Labeled examples with unique ids and labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<Example>,
    n_classes: u32,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text_b: Option<String>,
    label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flipped: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_id: Option<u64>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, n_classes: u32) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.id) {
                return Err(Error::DuplicateId(ex.id));
            }
            if ex.label >= n_classes {
                return Err(Error::invalid(format!(
                    "example {} has label {} outside 0..{n_classes}",
                    ex.id, ex.label
                )));
            }
        }
        for ex in &examples {
            if let Some(src) = ex.source_id {
                if !seen.contains(&src) {
                    return Err(Error::invalid(format!(
                        "example {} has provenance {src} which is not in the dataset",
                        ex.id
                    )));
                }
            }
        }
        Ok(Dataset {
            examples,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_classes(&self) -> u32 {
        self.n_classes
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn ids(&self) -> Vec<ExampleId> {
        self.examples.iter().map(|e| e.id).collect()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn texts(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.text.joined()).collect()
    }

    pub fn max_id(&self) -> Option<ExampleId> {
        self.examples.iter().map(|e| e.id).max()
    }

    /// Per-example flip flags, absent when noise was never injected.
    pub fn flip_mask(&self) -> Option<Vec<bool>> {
        if self.examples.iter().all(|e| e.flipped.is_none()) {
            return None;
        }
        Some(self.examples.iter().map(|e| e.flipped.unwrap_or(false)).collect())
    }

    pub fn provenance(&self) -> BTreeMap<ExampleId, ExampleId> {
        self.examples
            .iter()
            .filter_map(|e| e.source_id.map(|s| (e.id, s)))
            .collect()
    }

    pub fn index_of(&self) -> HashMap<ExampleId, usize> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id, i))
            .collect()
    }

    /// Examples at the given positions. Provenance pointing outside the
    /// subset is dropped.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut examples: Vec<Example> = rows.iter().map(|&i| self.examples[i].clone()).collect();
        let kept: HashSet<ExampleId> = examples.iter().map(|e| e.id).collect();
        for e in &mut examples {
            if e.source_id.is_some_and(|s| !kept.contains(&s)) {
                e.source_id = None;
            }
        }
        Dataset {
            examples,
            n_classes: self.n_classes,
        }
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut examples = Vec::new();
        let mut max_label = 0;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let text = match (rec.text, rec.text_a, rec.text_b) {
                (Some(t), None, None) => Text::Single(t),
                (None, Some(a), Some(b)) => Text::Pair(a, b),
                _ => {
                    return Err(parse_err(
                        "expected either `text` or both `text_a` and `text_b`".into(),
                    ))
                }
            };
            max_label = max_label.max(rec.label);
            examples.push(Example {
                id: ExampleId(rec.id),
                text,
                label: rec.label,
                flipped: rec.flipped,
                source_id: rec.source_id.map(ExampleId),
            });
        }
        Dataset::new(examples, (max_label + 1).max(2))
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for ex in &self.examples {
            let (text, text_a, text_b) = match &ex.text {
                Text::Single(t) => (Some(t.clone()), None, None),
                Text::Pair(a, b) => (None, Some(a.clone()), Some(b.clone())),
            };
            let rec = Record {
                id: ex.id.0,
                text,
                text_a,
                text_b,
                label: ex.label,
                flipped: ex.flipped,
                source_id: ex.source_id.map(|s| s.0),
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
