//! Readers and writers for the on-disk formats.
//!
//! * Edge list: one `i j` pair per line, `#` starts a comment.
//! * GML: the `graph [ node [ id .. label .. value .. ] edge [ source .. target .. ] ]`
//!   subset. Other keys are skipped.
//! * Attribute CSV `vertex_id,value` and label CSV `vertex_id,label`, both with header.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, GroundTruth};

/// Parses a whitespace-separated edge list. Vertex ids are taken as dense
/// indices, so the network has `max id + 1` vertices.
pub fn parse_edge_list(text: &str) -> Result<AttributedNetwork> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                line_no,
                format!("expected two vertex ids, found {} fields", fields.len()),
            ));
        }
        let parse_id = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("`{s}` is not a vertex id")))
        };
        let (a, b) = (parse_id(fields[0])?, parse_id(fields[1])?);
        if a == b {
            return Err(Error::validation(format!(
                "self-loop on vertex {a} at line {line_no}"
            )));
        }
        max_id = Some(max_id.map_or(a.max(b), |m| m.max(a).max(b)));
        edges.push((a, b));
    }
    let n = max_id.map_or(0, |m| m + 1);
    AttributedNetwork::from_edges(n, &edges)
}

pub fn write_edge_list(network: &AttributedNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} vertices, {} edges",
        network.n_vertices(),
        network.n_edges()
    );
    for &(i, j) in network.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Key(String),
    Int(i64),
    Real(f64),
    Str(String),
    Open,
    Close,
}

fn tokenize_gml(text: &str) -> Result<Vec<(Token, usize)>> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '[' => {
                tokens.push((Token::Open, line));
                chars.next();
            }
            ']' => {
                tokens.push((Token::Close, line));
                chars.next();
            }
            '"' => {
                let start = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c);
                        }
                        None => return Err(Error::parse(start, "unterminated string")),
                    }
                }
                tokens.push((Token::Str(s), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push((Token::Key(s), line));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E') {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let tok = if let Ok(v) = s.parse::<i64>() {
                    Token::Int(v)
                } else if let Ok(v) = s.parse::<f64>() {
                    Token::Real(v)
                } else {
                    return Err(Error::parse(line, format!("malformed number `{s}`")));
                };
                tokens.push((tok, line));
            }
            other => {
                return Err(Error::parse(line, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(tokens)
}

#[derive(Debug, Clone)]
enum Value {
    Int(i64),
    Real(f64),
    Str(String),
    List(Vec<(String, Value, usize)>),
}

struct GmlParser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl GmlParser {
    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or(self.tokens.last())
            .map_or(1, |t| t.1)
    }

    /// Parses `key value` pairs until `]` (when nested) or end of input.
    fn parse_list(&mut self, nested: bool) -> Result<Vec<(String, Value, usize)>> {
        let mut items = Vec::new();
        loop {
            let Some((tok, line)) = self.tokens.get(self.pos).cloned() else {
                if nested {
                    return Err(Error::parse(self.line(), "unbalanced brackets: missing `]`"));
                }
                return Ok(items);
            };
            self.pos += 1;
            let key = match tok {
                Token::Close if nested => return Ok(items),
                Token::Close => return Err(Error::parse(line, "unbalanced brackets: stray `]`")),
                Token::Key(k) => k,
                other => return Err(Error::parse(line, format!("expected a key, found {other:?}"))),
            };
            let Some((tok, vline)) = self.tokens.get(self.pos).cloned() else {
                return Err(Error::parse(line, format!("key `{key}` has no value")));
            };
            self.pos += 1;
            let value = match tok {
                Token::Int(v) => Value::Int(v),
                Token::Real(v) => Value::Real(v),
                Token::Str(s) => Value::Str(s),
                Token::Open => Value::List(self.parse_list(true)?),
                other => {
                    return Err(Error::parse(
                        vline,
                        format!("key `{key}` has invalid value {other:?}"),
                    ))
                }
            };
            items.push((key, value, line));
        }
    }
}

/// Node `value` field: integer classes or string classes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ClassValue {
    Int(i64),
    Str(String),
}

/// Parses the GML subset. Node ids are remapped to dense indices in order of
/// appearance; original ids are kept on the network. If every node carries a
/// `value`, distinct values (sorted) become community labels `0..k`.
pub fn parse_gml(text: &str) -> Result<(AttributedNetwork, Option<GroundTruth>)> {
    let tokens = tokenize_gml(text)?;
    let mut parser = GmlParser { tokens, pos: 0 };
    let top = parser.parse_list(false)?;
    let graph = top
        .into_iter()
        .find_map(|(k, v, _)| match (k.as_str(), v) {
            ("graph", Value::List(items)) => Some(items),
            _ => None,
        })
        .ok_or_else(|| Error::parse(1, "no `graph [ ... ]` block"))?;

    let mut ids = Vec::new();
    let mut index_of = HashMap::new();
    let mut classes: Vec<Option<ClassValue>> = Vec::new();
    let mut raw_edges = Vec::new();
    for (key, value, line) in graph {
        match (key.as_str(), value) {
            ("node", Value::List(fields)) => {
                let mut id = None;
                let mut class = None;
                for (k, v, _) in fields {
                    match (k.as_str(), v) {
                        ("id", Value::Int(v)) => id = Some(v),
                        ("id", _) => return Err(Error::parse(line, "node id must be an integer")),
                        ("value", Value::Int(v)) => class = Some(ClassValue::Int(v)),
                        ("value", Value::Str(s)) => class = Some(ClassValue::Str(s)),
                        ("value", Value::Real(v)) if v.fract() == 0.0 => {
                            class = Some(ClassValue::Int(v as i64))
                        }
                        _ => {}
                    }
                }
                let id = id.ok_or_else(|| Error::parse(line, "node without `id`"))?;
                if index_of.insert(id, ids.len()).is_some() {
                    return Err(Error::parse(line, format!("duplicate node id {id}")));
                }
                ids.push(id);
                classes.push(class);
            }
            ("edge", Value::List(fields)) => {
                let mut source = None;
                let mut target = None;
                for (k, v, _) in fields {
                    match (k.as_str(), v) {
                        ("source", Value::Int(v)) => source = Some(v),
                        ("target", Value::Int(v)) => target = Some(v),
                        _ => {}
                    }
                }
                let source = source.ok_or_else(|| Error::parse(line, "edge without `source`"))?;
                let target = target.ok_or_else(|| Error::parse(line, "edge without `target`"))?;
                raw_edges.push((source, target, line));
            }
            ("node" | "edge", _) => {
                return Err(Error::parse(line, format!("`{key}` must be a bracketed list")))
            }
            _ => {}
        }
    }

    let mut edges = Vec::with_capacity(raw_edges.len());
    for (s, t, line) in raw_edges {
        let lookup = |id: i64| {
            index_of
                .get(&id)
                .copied()
                .ok_or_else(|| Error::parse(line, format!("edge references unknown node {id}")))
        };
        edges.push((lookup(s)?, lookup(t)?));
    }
    let network = AttributedNetwork::from_edges(ids.len(), &edges)?.with_ids(ids);

    let truth = if !classes.is_empty() && classes.iter().all(Option::is_some) {
        let distinct: BTreeSet<&ClassValue> = classes.iter().flatten().collect();
        let code: BTreeMap<&ClassValue, usize> =
            distinct.into_iter().enumerate().map(|(k, c)| (c, k)).collect();
        let labels = classes.iter().flatten().map(|c| code[c]).collect();
        Some(GroundTruth::new(labels, code.len())?)
    } else {
        None
    };
    Ok((network, truth))
}

/// Writes the network (and labels as node `value`) in the GML subset.
pub fn write_gml(network: &AttributedNetwork, truth: Option<&GroundTruth>) -> String {
    let mut out = String::from("graph\n[\n");
    for v in 0..network.n_vertices() {
        let _ = writeln!(out, "  node\n  [\n    id {}", network.ids()[v]);
        if let Some(t) = truth {
            let _ = writeln!(out, "    value {}", t.labels()[v]);
        }
        out.push_str("  ]\n");
    }
    for &(i, j) in network.edges() {
        let _ = writeln!(
            out,
            "  edge\n  [\n    source {}\n    target {}\n  ]",
            network.ids()[i],
            network.ids()[j]
        );
    }
    out.push_str("]\n");
    out
}

fn dense_index(network: &AttributedNetwork) -> HashMap<i64, usize> {
    network
        .ids()
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, k))
        .collect()
}

/// Reads `vertex_id,value` rows. Every vertex must appear exactly once.
pub fn read_attributes<R: Read>(network: &AttributedNetwork, reader: R) -> Result<Vec<f64>> {
    let index = dense_index(network);
    let mut values = vec![None; network.n_vertices()];
    let mut rdr = csv::Reader::from_reader(reader);
    for (row, rec) in rdr.deserialize::<(i64, f64)>().enumerate() {
        let (id, value) = rec?;
        let v = *index.get(&id).ok_or_else(|| {
            Error::validation(format!("attribute row {} names unknown vertex {id}", row + 1))
        })?;
        if values[v].replace(value).is_some() {
            return Err(Error::validation(format!("vertex {id} has two attribute rows")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(v, x)| {
            x.ok_or_else(|| {
                Error::validation(format!("vertex {} has no attribute", network.ids()[v]))
            })
        })
        .collect()
}

pub fn write_attributes<W: Write>(network: &AttributedNetwork, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vertex_id", "value"])?;
    for (v, d) in network.attributes().iter().enumerate() {
        w.write_record([network.ids()[v].to_string(), format!("{d:?}")])?;
    }
    w.flush().map_err(|e| Error::io("<attributes>", e))?;
    Ok(())
}

/// Reads `vertex_id,label` rows covering every vertex.
pub fn read_labels<R: Read>(network: &AttributedNetwork, reader: R) -> Result<GroundTruth> {
    let index = dense_index(network);
    let mut labels = vec![None; network.n_vertices()];
    let mut rdr = csv::Reader::from_reader(reader);
    for rec in rdr.deserialize::<(i64, usize)>() {
        let (id, label) = rec?;
        let v = *index
            .get(&id)
            .ok_or_else(|| Error::validation(format!("label row names unknown vertex {id}")))?;
        if labels[v].replace(label).is_some() {
            return Err(Error::validation(format!("vertex {id} has two label rows")));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| {
            l.ok_or_else(|| Error::validation(format!("vertex {} has no label", network.ids()[v])))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth::from_labels(labels))
}

pub fn write_labels<W: Write>(
    network: &AttributedNetwork,
    labels: &GroundTruth,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vertex_id", "label"])?;
    for (v, l) in labels.labels().iter().enumerate() {
        w.write_record([network.ids()[v].to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

/// Writes `vertex_id,p0,p1,...` rows of marginal probabilities.
pub fn write_beliefs<W: Write>(
    network: &AttributedNetwork,
    beliefs: &crate::bp::Marginals,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["vertex_id".to_string()];
    header.extend((0..beliefs.n_labels()).map(|l| format!("p{l}")));
    w.write_record(&header)?;
    for (v, row) in beliefs.rows().enumerate() {
        let mut rec = vec![network.ids()[v].to_string()];
        rec.extend(row.iter().map(|p| format!("{p:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<beliefs>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_examples() {
        let g = parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (3, 2));
        let g = parse_edge_list("").unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (0, 0));
        assert!(matches!(parse_edge_list("0 0"), Err(Error::Validation(_))));
    }

    #[test]
    fn edge_list_comments_and_errors() {
        let g = parse_edge_list("# header\n\n0 3 # trailing\n2 1\n").unwrap();
        assert_eq!((g.n_vertices(), g.n_edges()), (4, 2));
        match parse_edge_list("0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edge_list("0 1 2"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_edge_list("0 1\n1 0").is_err());
    }

    const SMALL_GML: &str = r#"
Creator "test"
graph
[
  directed 0
  node [ id 10 label "a" value "l" ]
  node [ id 20 label "b" value "c" ]
  node [ id 30 label "c" value "l" ]
  edge [ source 10 target 20 ]
  edge [ source 30 target 20 ]
]
"#;

    #[test]
    fn gml_remaps_ids_and_reads_values() {
        let (g, truth) = parse_gml(SMALL_GML).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.ids(), &[10, 20, 30]);
        let truth = truth.unwrap();
        assert_eq!(truth.labels(), &[1, 0, 1]);
        assert_eq!(truth.n_communities(), 2);
    }

    #[test]
    fn gml_partial_values_give_no_truth() {
        let text = "graph [ node [ id 1 value 3 ] node [ id 2 ] edge [ source 1 target 2 ] ]";
        let (g, truth) = parse_gml(text).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert!(truth.is_none());
    }

    #[test]
    fn gml_errors_carry_positions() {
        let unbalanced = "graph [\n node [ id 1 ]\n";
        assert!(matches!(parse_gml(unbalanced), Err(Error::Parse { .. })));
        let stray = "graph [ node [ id 1 ] ] ]";
        assert!(matches!(parse_gml(stray), Err(Error::Parse { .. })));
        let no_id = "graph [\n node [ label \"x\" ]\n]";
        match parse_gml(no_id) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let no_target = "graph [ node [ id 1 ] node [ id 2 ]\n edge [ source 1 ] ]";
        assert!(matches!(parse_gml(no_target), Err(Error::Parse { line: 2, .. })));
        let unknown = "graph [ node [ id 1 ] edge [ source 1 target 9 ] ]";
        assert!(matches!(parse_gml(unknown), Err(Error::Parse { .. })));
    }

    #[test]
    fn gml_write_then_parse() {
        let (g, truth) = parse_gml(SMALL_GML).unwrap();
        let text = write_gml(&g, truth.as_ref());
        let (g2, truth2) = parse_gml(&text).unwrap();
        assert_eq!(g, g2);
        assert_eq!(truth, truth2);
    }

    #[test]
    fn attribute_and_label_csv() {
        let (g, truth) = parse_gml(SMALL_GML).unwrap();
        let g = g.with_attributes(vec![0.5, -1.25, 1e-3]).unwrap();
        let mut buf = Vec::new();
        write_attributes(&g, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("vertex_id,value\n10,0.5\n"));
        assert_eq!(read_attributes(&g, buf.as_slice()).unwrap(), g.attributes());

        let truth = truth.unwrap();
        let mut buf = Vec::new();
        write_labels(&g, &truth, &mut buf).unwrap();
        assert_eq!(read_labels(&g, buf.as_slice()).unwrap(), truth);

        let missing = "vertex_id,value\n10,1.0\n20,2.0\n";
        assert!(read_attributes(&g, missing.as_bytes()).is_err());
        let unknown = "vertex_id,value\n10,1\n20,2\n30,3\n40,4\n";
        assert!(read_attributes(&g, unknown.as_bytes()).is_err());
    }
}
