//! Line-delimited JSON dataset files.
//!
//! Line 1 is a header `{"task","num_classes","feature_dim"}` (plus an optional
//! `split_seed`); every following non-blank line is one graph
//! `{"n","edges":[[i,j],..],"x"?,"y","center"?}` with `i < j`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Graph, Label, Task};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    task: String,
    num_classes: usize,
    feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split_seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelRecord {
    Graph(usize),
    Node(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<f64>>>,
    y: LabelRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<usize>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_dataset(BufReader::new(file))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(ds, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn parse_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let header: Header = serde_json::from_str(&first?).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let task = Task::parse(&header.task).ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("unknown task {:?}", header.task),
    })?;
    let mut graphs = Vec::new();
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&text).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        graphs.push(record_to_graph(rec, header.feature_dim).map_err(|e| match e {
            Error::Validation(m) | Error::Shape(m) => Error::Validation(format!("line {line}: {m}")),
            other => other,
        })?);
    }
    Dataset::new(graphs, task, header.num_classes, header.feature_dim, header.split_seed.unwrap_or(0))
}

fn record_to_graph(rec: GraphRecord, feature_dim: usize) -> Result<Graph> {
    let mut edges = Vec::with_capacity(rec.edges.len());
    for [i, j] in rec.edges {
        if i > j {
            return Err(Error::Validation(format!("edge [{i},{j}] must be listed with i < j")));
        }
        edges.push((i, j));
    }
    let mut g = Graph::from_edges(rec.n, &edges)?;
    let features = match rec.x {
        Some(rows) => {
            if rows.len() != rec.n || rows.iter().any(|r| r.len() != feature_dim) {
                return Err(Error::Validation(format!("x must be {} rows of {feature_dim} values", rec.n)));
            }
            rows.concat()
        }
        None => vec![1.0; rec.n * feature_dim],
    };
    g.set_features(feature_dim, features)?;
    g.label = match rec.y {
        LabelRecord::Graph(y) => Label::Graph(y),
        LabelRecord::Node(ys) => Label::Node(ys),
    };
    g.center = rec.center;
    g.validate()?;
    Ok(g)
}

pub fn write_dataset(ds: &Dataset, mut w: impl Write) -> Result<()> {
    let header = Header {
        task: ds.task.as_str().to_string(),
        num_classes: ds.num_classes,
        feature_dim: ds.feature_dim,
        split_seed: Some(ds.split_seed),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for g in &ds.graphs {
        let d = g.feature_dim();
        let x = (!g.features().iter().all(|&v| v == 1.0)).then(|| g.features().chunks(d.max(1)).map(<[f64]>::to_vec).collect());
        let y = match &g.label {
            Label::Graph(y) => LabelRecord::Graph(*y),
            Label::Node(ys) => LabelRecord::Node(ys.clone()),
            Label::None => return Err(Error::Validation("cannot save an unlabeled graph".into())),
        };
        let rec = GraphRecord {
            n: g.n(),
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            x,
            y,
            center: g.center,
        };
        writeln!(w, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
    }
    Ok(())
}
