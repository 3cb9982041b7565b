use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{QuestionRecord, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}schema error at `{field}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct SchemaError {
    pub line: Option<usize>,
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { line: None, field: field.into(), reason: reason.into() }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Deserialises one JSON value, reporting the path of the offending field.
pub fn from_json_str<T: DeserializeOwned>(raw: &str) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        // Missing fields are reported at their parent; name the field itself.
        let missing = message.strip_prefix("missing field `").and_then(|m| m.split('`').next());
        let field = match (path.as_str(), missing) {
            (".", Some(name)) => name.to_string(),
            (".", None) => "<record>".to_string(),
            (_, Some(name)) => format!("{path}.{name}"),
            (_, None) => path,
        };
        SchemaError::new(field, message)
    })
}

impl Trajectory {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory serialisation cannot fail")
    }

    pub fn from_json_line(raw: &str) -> Result<Self, SchemaError> {
        let traj: Trajectory = from_json_str(raw)?;
        traj.validate()?;
        Ok(traj)
    }
}

/// Reads `(line_number, text)` pairs of the non-blank lines of a JSON Lines file.
pub fn read_jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>, JsonlError> {
    let io_err = |source| JsonlError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, JsonlError> {
    read_jsonl_lines(path)?
        .into_iter()
        .map(|(n, line)| Trajectory::from_json_line(&line).map_err(|e| e.at_line(n).into()))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let io_err = |source| JsonlError::Io { path: path.display().to_string(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for record in records {
        let line = serde_json::to_string(record).expect("record serialisation cannot fail");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<(), JsonlError> {
    write_jsonl(path, trajectories)
}

/// Question records indexed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<QuestionRecord>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(records: Vec<QuestionRecord>) -> Result<Self, SchemaError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            record.validate()?;
            if by_id.insert(record.id.clone(), i).is_some() {
                return Err(SchemaError::new("id", format!("duplicate id {:?}", record.id)));
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&QuestionRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[QuestionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), JsonlError> {
        write_jsonl(path, &self.records)
    }
}

/// Loads a `{id, question, golden_answers}` JSON Lines file.
pub fn load_dataset(path: &Path) -> Result<Dataset, JsonlError> {
    let mut records = Vec::new();
    for (n, line) in read_jsonl_lines(path)? {
        let record: QuestionRecord = from_json_str(&line).map_err(|e| e.at_line(n))?;
        record.validate().map_err(|e| e.at_line(n))?;
        records.push(record);
    }
    Ok(Dataset::new(records)?)
}
