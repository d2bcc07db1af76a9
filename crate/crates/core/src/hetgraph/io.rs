//! Plain-text graph files.
//!
//! * schema: `node <name>` and `edge <name> <src type> <dst type>` lines
//! * nodes: `<type>,<name>,<attr>,<attr>,...`
//! * edges: `<edge type>,<src name>,<dst name>`
//!
//! Blank lines and lines starting with `#` are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{HetGraph, Schema};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug)]
pub struct GraphFiles {
    pub schema: PathBuf,
    pub nodes: PathBuf,
    pub edges: PathBuf,
}

impl GraphFiles {
    /// `schema.txt`, `nodes.txt` and `edges.txt` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            schema: d.join("schema.txt"),
            nodes: d.join("nodes.txt"),
            edges: d.join("edges.txt"),
        }
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{line}: {msg}", path.display()))
}

pub fn read_graph(files: &GraphFiles) -> Result<HetGraph> {
    let mut schema = Schema::new();
    let text = read(&files.schema)?;
    for (ln, line) in content_lines(&text) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["node", name] => {
                schema.add_node_type(name)?;
            }
            ["edge", name, src, dst] => {
                let s = schema
                    .node_type(src)
                    .ok_or_else(|| data_err(&files.schema, ln, format!("unknown node type '{src}'")))?;
                let d = schema
                    .node_type(dst)
                    .ok_or_else(|| data_err(&files.schema, ln, format!("unknown node type '{dst}'")))?;
                schema.add_edge_type(name, s, d)?;
            }
            _ => return Err(data_err(&files.schema, ln, format!("cannot parse '{line}'"))),
        }
    }

    let nt = schema.num_node_types();
    let mut names: Vec<Vec<String>> = vec![Vec::new(); nt];
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); nt];
    let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); nt];
    let text = read(&files.nodes)?;
    for (ln, line) in content_lines(&text) {
        let mut fields = line.split(',').map(str::trim);
        let ty = fields.next().unwrap_or_default();
        let t = schema
            .node_type(ty)
            .ok_or_else(|| data_err(&files.nodes, ln, format!("unknown node type '{ty}'")))?;
        let name = fields
            .next()
            .filter(|n| !n.is_empty())
            .ok_or_else(|| data_err(&files.nodes, ln, "missing node name"))?;
        let attrs = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| data_err(&files.nodes, ln, format!("bad attribute '{f}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let ti = t.0 as usize;
        if let Some(first) = rows[ti].first() {
            if first.len() != attrs.len() {
                return Err(data_err(
                    &files.nodes,
                    ln,
                    format!("{} attributes, earlier '{ty}' nodes have {}", attrs.len(), first.len()),
                ));
            }
        }
        if lookup[ti].insert(name.to_string(), names[ti].len()).is_some() {
            return Err(data_err(&files.nodes, ln, format!("duplicate node '{name}'")));
        }
        names[ti].push(name.to_string());
        rows[ti].push(attrs);
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); schema.num_edge_types()];
    let text = read(&files.edges)?;
    for (ln, line) in content_lines(&text) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let [et, src, dst] = f.as_slice() else {
            return Err(data_err(&files.edges, ln, "expected edge-type,src,dst"));
        };
        let e = schema
            .edge_type(et)
            .ok_or_else(|| data_err(&files.edges, ln, format!("unknown edge type '{et}'")))?;
        let decl = schema.edge_decl(e)?;
        let s = *lookup[decl.src.0 as usize]
            .get(*src)
            .ok_or_else(|| data_err(&files.edges, ln, format!("unknown source node '{src}'")))?;
        let d = *lookup[decl.dst.0 as usize]
            .get(*dst)
            .ok_or_else(|| data_err(&files.edges, ln, format!("unknown destination node '{dst}'")))?;
        edges[e.0 as usize].push((s, d));
    }

    let attributes = rows
        .iter()
        .map(|r| {
            if r.is_empty() {
                Ok(DenseMatrix::zeros(0, 0))
            } else {
                DenseMatrix::from_rows(r)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    HetGraph::new(schema, attributes, edges, Some(names))
}

pub fn write_graph(graph: &HetGraph, dir: impl AsRef<Path>) -> Result<GraphFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = GraphFiles::in_dir(dir);
    let schema = graph.schema();

    let mut s = String::from("# node <name> | edge <name> <src> <dst>\n");
    for t in schema.node_type_ids() {
        writeln!(s, "node {}", schema.node_type_name(t)).expect("string write");
    }
    for e in schema.edge_type_ids() {
        let d = schema.edge_decl(e)?;
        writeln!(
            s,
            "edge {} {} {}",
            d.name,
            schema.node_type_name(d.src),
            schema.node_type_name(d.dst)
        )
        .expect("string write");
    }
    fs::write(&files.schema, s).map_err(|e| Error::io(&files.schema, e))?;

    let mut s = String::from("# type,name,attributes...\n");
    for t in schema.node_type_ids() {
        let attrs = graph.attributes(t);
        for (i, name) in graph.node_names(t).iter().enumerate() {
            s.push_str(schema.node_type_name(t));
            s.push(',');
            s.push_str(name);
            for v in attrs.row(i) {
                write!(s, ",{v}").expect("string write");
            }
            s.push('\n');
        }
    }
    fs::write(&files.nodes, s).map_err(|e| Error::io(&files.nodes, e))?;

    let mut s = String::from("# edge-type,src,dst\n");
    for e in schema.edge_type_ids() {
        let d = schema.edge_decl(e)?;
        let (sn, dn) = (graph.node_names(d.src), graph.node_names(d.dst));
        for &(a, b) in graph.edges(e) {
            writeln!(s, "{},{},{}", d.name, sn[a], dn[b]).expect("string write");
        }
    }
    fs::write(&files.edges, s).map_err(|e| Error::io(&files.edges, e))?;
    Ok(files)
}
