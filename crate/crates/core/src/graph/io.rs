use std::fmt::Write;

use super::CompatGraph;
use crate::error::GraphError;

/// One `i j` line per edge, 0-indexed with i < j, in lexicographic order.
pub fn write_edge_list(graph: &CompatGraph) -> String {
    let mut out = String::new();
    for (i, j) in graph.edges() {
        writeln!(out, "{i} {j}").expect("writing to a String");
    }
    out
}

/// Parses an edge list. Blank lines and lines starting with `#` are skipped.
///
/// Without `n_vertices` the vertex count is one past the largest index seen.
pub fn parse_edge_list(text: &str, n_vertices: Option<usize>) -> Result<CompatGraph, GraphError> {
    let mut edges = Vec::new();
    let mut max_index = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |reason: String| GraphError::Parse {
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(format!(
                "expected two vertex indices, found {} fields",
                fields.len()
            )));
        }
        let mut ends = [0usize; 2];
        for (slot, f) in ends.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| parse_err(format!("'{f}' is not a vertex index")))?;
        }
        let [i, j] = ends;
        if i == j {
            return Err(parse_err(format!("self-loop on vertex {i}")));
        }
        if let Some(n) = n_vertices {
            if i.max(j) >= n {
                return Err(parse_err(format!(
                    "vertex {} out of range for {n} vertices",
                    i.max(j)
                )));
            }
        }
        max_index = max_index.max(Some(i.max(j)));
        edges.push((i, j));
    }
    let n = n_vertices.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
    CompatGraph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let g = CompatGraph::from_edges(5, [(3, 1), (0, 4), (1, 2)]).unwrap();
        let text = write_edge_list(&g);
        assert_eq!(text, "0 4\n1 2\n1 3\n");
        assert_eq!(parse_edge_list(&text, Some(5)).unwrap(), g);
    }

    #[test]
    fn comments_and_inferred_size() {
        let g = parse_edge_list("# header\n\n0 1\n 2 1 \n", None).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_edge_list("0 1\n1 x\n", None).unwrap_err();
        assert!(matches!(e, GraphError::Parse { line: 2, .. }));
        let e = parse_edge_list("0 1\n\n2 2\n", None).unwrap_err();
        assert!(matches!(e, GraphError::Parse { line: 3, .. }));
        let e = parse_edge_list("0 7\n", Some(4)).unwrap_err();
        assert!(matches!(e, GraphError::Parse { line: 1, .. }));
        assert!(parse_edge_list("0 1 2\n", None).is_err());
    }
}
