use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth for one image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(rename = "id")]
    pub item_id: String,
    pub gt_objects: BTreeSet<String>,
    /// Perceptually plausible hallucination targets.
    #[serde(default)]
    pub cognition_objects: BTreeSet<String>,
}

impl Annotation {
    pub fn validate(&self) -> Result<()> {
        if let Some(o) = self.gt_objects.intersection(&self.cognition_objects).next() {
            return Err(Error::input(
                None,
                format!("annotation {:?}: {o:?} is both ground truth and a cognition target", self.item_id),
            ));
        }
        Ok(())
    }
}

/// Maps surface forms (singular, plural, synonyms; possibly multi-word) to
/// canonical object names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct ObjectLexicon {
    entries: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    surface: HashMap<Vec<String>, String>,
    #[serde(skip)]
    max_words: usize,
}

impl ObjectLexicon {
    /// Each object name also matches itself.
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut surface: HashMap<Vec<String>, String> = HashMap::new();
        let mut max_words = 0;
        let mut normalized = BTreeMap::new();
        for (name, forms) in entries {
            let name = name.trim().to_lowercase();
            if name.is_empty() {
                return Err(Error::input(None, "lexicon contains an empty object name"));
            }
            let mut all: BTreeSet<String> = forms.iter().map(|f| f.trim().to_lowercase()).collect();
            all.insert(name.clone());
            for form in &all {
                let words: Vec<String> = form.split_whitespace().map(String::from).collect();
                if words.is_empty() {
                    return Err(Error::input(None, format!("object {name:?} has an empty surface form")));
                }
                max_words = max_words.max(words.len());
                if let Some(prev) = surface.insert(words, name.clone()) {
                    if prev != name {
                        return Err(Error::input(
                            None,
                            format!("surface form {form:?} maps to both {prev:?} and {name:?}"),
                        ));
                    }
                }
            }
            normalized.insert(name, all.into_iter().collect());
        }
        Ok(Self { entries: normalized, surface, max_words })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn lookup(&self, words: &[String]) -> Option<&str> {
        self.surface.get(words).map(String::as_str)
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for ObjectLexicon {
    type Error = Error;

    fn try_from(m: BTreeMap<String, Vec<String>>) -> Result<Self> {
        ObjectLexicon::new(m)
    }
}

impl From<ObjectLexicon> for BTreeMap<String, Vec<String>> {
    fn from(l: ObjectLexicon) -> Self {
        l.entries
    }
}

/// A generated caption as a token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    #[serde(rename = "id")]
    pub item_id: String,
    pub tokens: Vec<String>,
}

impl CaptionRecord {
    pub fn new(item_id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        let item_id = item_id.into();
        if tokens.is_empty() {
            return Err(Error::input(None, format!("caption {item_id:?} is empty")));
        }
        Ok(Self { item_id, tokens })
    }

    /// Splits on whitespace and trims surrounding punctuation.
    pub fn from_text(item_id: impl Into<String>, text: &str) -> Result<Self> {
        Self::new(item_id, tokenize(text))
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// An object mention and the token position where it starts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub object: String,
    pub position: usize,
}

/// Case-insensitive longest-match scan. Each token belongs to at most one
/// mention; repeated mentions are kept in order.
pub fn extract_objects(caption: &CaptionRecord, lexicon: &ObjectLexicon) -> Vec<Mention> {
    let words: Vec<String> = caption.tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let longest = (1..=lexicon.max_words.min(words.len() - i))
            .rev()
            .find_map(|n| lexicon.lookup(&words[i..i + n]).map(|o| (o, n)));
        match longest {
            Some((object, n)) => {
                out.push(Mention { object: object.to_string(), position: i });
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

pub fn mention_set(mentions: &[Mention]) -> BTreeSet<String> {
    mentions.iter().map(|m| m.object.clone()).collect()
}
