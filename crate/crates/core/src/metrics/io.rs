use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::analysis::{RunSummary, StepSummary};
use super::objects::{Annotation, CaptionRecord, ObjectLexicon};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn parse_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Error::input(Some(e.line()), format!("{}: {e}", path.display())))
}

pub fn load_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let anns: Vec<Annotation> = parse_json(path)?;
    for a in &anns {
        a.validate()?;
    }
    Ok(anns)
}

pub fn load_lexicon(path: &Path) -> Result<ObjectLexicon> {
    parse_json(path)
}

/// Non-blank lines of a JSONL file, parsed one by one.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::input(Some(i + 1), format!("{}: {e}", path.display())))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CaptionLine {
    id: String,
    #[serde(default)]
    caption: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
}

/// Each line holds `{"id", "caption": text}` or `{"id", "tokens": [...]}`.
pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    read_jsonl::<CaptionLine>(path)?
        .into_iter()
        .map(|(line, c)| {
            let rec = match (c.caption, c.tokens) {
                (Some(text), None) => CaptionRecord::from_text(c.id, &text),
                (None, Some(tokens)) => CaptionRecord::new(c.id, tokens),
                _ => return Err(Error::input(Some(line), "expected exactly one of \"caption\" or \"tokens\"")),
            };
            rec.map_err(|e| Error::input(Some(line), e.to_string()))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    prompt_id: String,
    strategy: String,
    seed: u64,
    steps: usize,
}

/// One header line, then one step per line.
pub fn write_trace(path: &Path, run: &RunSummary) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let header = TraceHeader {
        prompt_id: run.prompt_id.clone(),
        strategy: run.strategy.clone(),
        seed: run.seed,
        steps: run.steps.len(),
    };
    let ser = |e: serde_json::Error| Error::Contract(e.to_string());
    writeln!(w, "{}", serde_json::to_string(&header).map_err(ser)?).map_err(io)?;
    for s in &run.steps {
        writeln!(w, "{}", serde_json::to_string(s).map_err(ser)?).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trace(path: &Path) -> Result<RunSummary> {
    let mut lines = open(path)?.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::input(Some(1), format!("{}: empty trace", path.display())))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: TraceHeader = serde_json::from_str(&first)
        .map_err(|e| Error::input(Some(1), format!("{}: bad trace header: {e}", path.display())))?;
    let mut steps = Vec::with_capacity(header.steps);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let step: StepSummary = serde_json::from_str(&line)
            .map_err(|e| Error::input(Some(i + 1), format!("{}: {e}", path.display())))?;
        steps.push(step);
    }
    if steps.len() != header.steps {
        return Err(Error::input(
            None,
            format!("{}: header declares {} steps, found {}", path.display(), header.steps, steps.len()),
        ));
    }
    Ok(RunSummary { prompt_id: header.prompt_id, strategy: header.strategy, seed: header.seed, steps })
}

/// Every `*.jsonl` trace under `dir`, in file-name order.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::input(None, format!("no .jsonl traces in {}", dir.display())));
    }
    paths.iter().map(|p| read_trace(p)).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Contract(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Contract(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
