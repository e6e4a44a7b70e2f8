//! Plain edge-list text: a header line `<d> <edge count>` followed by one
//! `j k` line per edge, 1-indexed.

use std::fmt::Write as _;

use super::{Edge, Graph, GraphError, Result};

impl Graph {
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.d(), self.edge_count());
        for e in self.edges() {
            writeln!(out, "{} {}", e.lo(), e.hi()).expect("writing to a String cannot fail");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(GraphError::Parse { line: 1, reason: "missing header".into() })?;
        let [d, count] = parse_pair(line, header)?;
        let mut g = Graph::empty(d);
        for (line, text) in lines {
            let [a, b] = parse_pair(line, text)?;
            let e = Edge::new(a, b).map_err(|err| GraphError::Parse { line, reason: err.to_string() })?;
            match g.add_edge(e) {
                Ok(true) => {}
                Ok(false) => return Err(GraphError::Parse { line, reason: format!("duplicate edge {e}") }),
                Err(err) => return Err(GraphError::Parse { line, reason: err.to_string() }),
            }
        }
        if g.edge_count() != count {
            return Err(GraphError::Parse {
                line: 1,
                reason: format!("header declares {count} edges, found {}", g.edge_count()),
            });
        }
        Ok(g)
    }
}

fn parse_pair(line: usize, text: &str) -> Result<[usize; 2]> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(GraphError::Parse { line, reason: format!("expected two integers, got {:?}", text) });
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|e| GraphError::Parse { line, reason: format!("{s:?}: {e}") });
    Ok([parse(fields[0])?, parse(fields[1])?])
}
