//! Comma-separated score tables, solution files and ranking files.
//!
//! Score tables have the header `id,label,c0,...,c{m-1}`; the `label`
//! column is optional for unlabeled test data. Floats are written with
//! Rust's shortest round-trip formatting, so reading a written table gives
//! back bit-identical values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clarifuse::{
    ClaritySolution64, Direction, Label, LabeledInstance64, ScoreVector64, WeightVector64,
};

/// Parsed score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreVector64>,
    pub labels: Option<Vec<Label>>,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(raw: &str, source: &str, line: u64, column: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| anyhow!("{source}:{line}: column '{column}': '{raw}' is not a number"))
}

impl ScoreTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut rdr = reader(r);
        let header = rdr
            .headers()
            .with_context(|| format!("{source}: cannot read header"))?
            .clone();
        if header.get(0) != Some("id") {
            bail!("{source}:1: first column must be 'id'");
        }
        let labeled = header.get(1) == Some("label");
        let first_score = if labeled { 2 } else { 1 };
        let score_cols: Vec<String> = header.iter().skip(first_score).map(String::from).collect();
        if score_cols.is_empty() {
            bail!("{source}:1: no score columns");
        }

        let mut rows = Vec::new();
        let mut labels = labeled.then(Vec::new);
        for record in rdr.records() {
            let record = record.with_context(|| format!("{source}: malformed row"))?;
            let line = line_of(&record);
            if record.len() != header.len() {
                bail!(
                    "{source}:{line}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                );
            }
            let id = &record[0];
            if let Some(labels) = labels.as_mut() {
                let label = match &record[1] {
                    "0" => Label::Negative,
                    "1" => Label::Positive,
                    other => bail!("{source}:{line}: column 'label': expected 0 or 1, got '{other}'"),
                };
                labels.push(label);
            }
            let values = score_cols
                .iter()
                .enumerate()
                .map(|(k, col)| parse_f64(&record[first_score + k], source, line, col))
                .collect::<Result<Vec<_>>>()?;
            let row = ScoreVector64::new(id, values)
                .map_err(|e| anyhow!("{source}:{line}: {e}"))?;
            rows.push(row);
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = rows.iter().find(|r| !seen.insert(r.id())) {
            bail!("{source}: duplicate id '{}'", dup.id());
        }
        Ok(Self { rows, labels })
    }

    pub fn labeled(instances: &[LabeledInstance64]) -> Self {
        Self {
            rows: instances.iter().map(|i| i.scores.clone()).collect(),
            labels: Some(instances.iter().map(|i| i.label).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.dim())
    }

    /// Labeled rows, or an error naming the missing column.
    pub fn require_labels(&self, source: &str) -> Result<Vec<LabeledInstance64>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| anyhow!("{source}: missing required column 'label'"))?;
        Ok(self
            .rows
            .iter()
            .zip(labels)
            .map(|(r, &l)| LabeledInstance64::new(r.clone(), l))
            .collect())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string()];
        if self.labels.is_some() {
            header.push("label".into());
        }
        header.extend((0..self.dim()).map(|k| format!("c{k}")));
        out.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.id().to_string()];
            if let Some(labels) = &self.labels {
                rec.push(if labels[i].is_positive() { "1" } else { "0" }.into());
            }
            rec.extend(row.values().iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.write_to(file)
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Maximized => "max",
        Direction::Minimized => "min",
    }
}

/// One learned solution per test instance:
/// `id,rcl,direction,iters_ascent,iters_descent,alpha,same_sign,degenerate,w0,...`.
pub fn write_solutions<W: Write>(w: W, solutions: &[(String, ClaritySolution64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let m = solutions.first().map_or(0, |s| s.1.weights.dim());
    let mut header: Vec<String> = [
        "id", "rcl", "direction", "iters_ascent", "iters_descent", "alpha", "same_sign", "degenerate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..m).map(|k| format!("w{k}")));
    out.write_record(&header)?;
    for (id, s) in solutions {
        let mut rec = vec![
            id.clone(),
            s.rcl.to_string(),
            direction_name(s.direction).into(),
            s.iterations.0.to_string(),
            s.iterations.1.to_string(),
            s.alpha.to_string(),
            u8::from(s.same_sign).to_string(),
            u8::from(s.degenerate_projection).to_string(),
        ];
        rec.extend(s.weights.values().iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_solutions(path: &Path) -> Result<Vec<(String, ClaritySolution64)>> {
    let source = path.display().to_string();
    let file = File::open(path).with_context(|| format!("cannot open {source}"))?;
    let mut rdr = reader(file);
    let header = rdr.headers()?.clone();
    const FIXED: usize = 8;
    if header.len() <= FIXED || header.get(0) != Some("id") || header.get(1) != Some("rcl") {
        bail!("{source}:1: not a solutions file (expected id,rcl,direction,...,w0,...)");
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.with_context(|| format!("{source}: malformed row"))?;
        let line = line_of(&record);
        if record.len() != header.len() {
            bail!("{source}:{line}: expected {} fields, found {}", header.len(), record.len());
        }
        let num = |k: usize| parse_f64(&record[k], &source, line, &header[k]);
        let count = |k: usize| {
            record[k]
                .parse::<usize>()
                .map_err(|_| anyhow!("{source}:{line}: column '{}': not a count", &header[k]))
        };
        let direction = match &record[2] {
            "max" => Direction::Maximized,
            "min" => Direction::Minimized,
            other => bail!("{source}:{line}: column 'direction': unknown value '{other}'"),
        };
        let weights = (FIXED..record.len()).map(num).collect::<Result<Vec<_>>>()?;
        let weights =
            WeightVector64::new(weights).map_err(|e| anyhow!("{source}:{line}: {e}"))?;
        out.push((
            record[0].to_string(),
            ClaritySolution64 {
                weights,
                rcl: num(1)?,
                direction,
                iterations: (count(3)?, count(4)?),
                alpha: num(5)?,
                same_sign: &record[6] == "1",
                degenerate_projection: &record[7] == "1",
            },
        ));
    }
    Ok(out)
}

/// Ranking files: `rank,id,criterion,score`, best first.
pub fn write_ranking<W: Write>(w: W, criterion: &str, ranked: &[(String, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "id", "criterion", "score"])?;
    for (pos, (id, score)) in ranked.iter().enumerate() {
        out.write_record([(pos + 1).to_string(), id.clone(), criterion.into(), score.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Ids of a ranking file in rank order.
pub fn read_ranking(path: &Path) -> Result<Vec<String>> {
    let source = path.display().to_string();
    let file = File::open(path).with_context(|| format!("cannot open {source}"))?;
    let mut rdr = reader(file);
    let header = rdr.headers()?.clone();
    let rank_col = header.iter().position(|h| h == "rank");
    let id_col = header
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| anyhow!("{source}:1: missing required column 'id'"))?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.with_context(|| format!("{source}: malformed row"))?;
        let line = line_of(&record);
        let rank = match rank_col {
            Some(c) => record
                .get(c)
                .and_then(|r| r.parse::<usize>().ok())
                .ok_or_else(|| anyhow!("{source}:{line}: column 'rank': not a position"))?,
            None => rows.len() + 1,
        };
        let id = record
            .get(id_col)
            .ok_or_else(|| anyhow!("{source}:{line}: missing id"))?;
        rows.push((rank, id.to_string()));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}

/// `id` plus one or more `label*` columns, one per class.
/// Column name and one flag per row.
pub type LabelColumn = (String, Vec<bool>);

pub fn read_label_columns(path: &Path) -> Result<(Vec<String>, Vec<LabelColumn>)> {
    let source = path.display().to_string();
    let file = File::open(path).with_context(|| format!("cannot open {source}"))?;
    let mut rdr = reader(file);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        bail!("{source}:1: first column must be 'id'");
    }
    let label_cols: Vec<usize> = (0..header.len())
        .filter(|&k| header[k].starts_with("label"))
        .collect();
    if label_cols.is_empty() {
        bail!("{source}: missing required column 'label'");
    }
    let mut ids = Vec::new();
    let mut cols: Vec<LabelColumn> = label_cols
        .iter()
        .map(|&k| (header[k].to_string(), Vec::new()))
        .collect();
    for record in rdr.records() {
        let record = record.with_context(|| format!("{source}: malformed row"))?;
        let line = line_of(&record);
        ids.push(record[0].to_string());
        for (slot, &k) in cols.iter_mut().zip(&label_cols) {
            let v = match record.get(k) {
                Some("1") => true,
                Some("0") => false,
                other => bail!(
                    "{source}:{line}: column '{}': expected 0 or 1, got '{}'",
                    &header[k],
                    other.unwrap_or("")
                ),
            };
            slot.1.push(v);
        }
    }
    Ok((ids, cols))
}
