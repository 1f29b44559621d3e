//! TSV ingestion: opaque string ids re-indexed densely per node kind.
//!
//! `nodes.tsv` lines are `node_id<TAB>kind` with kind in {chemical, gene};
//! `edges.tsv` lines are `head_id<TAB>relation<TAB>tail_id` with relation in
//! {increase, decrease, binding, affect, chem_chem, gene_gene}. Lines starting
//! with `#` are ignored; LF and CRLF both accepted.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{GraphError, HeteroGraph, NodeId, RelationType};

/// Post-ingestion tallies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub n_chem: usize,
    pub n_gene: usize,
    /// Deduplicated edge counts, indexed by `RelationType::index()`.
    pub edges_per_relation: [usize; 4],
    pub chem_chem_edges: usize,
    pub gene_gene_edges: usize,
    pub duplicates_collapsed: usize,
}

pub fn ingest_tsv(
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<(HeteroGraph, IngestSummary), GraphError> {
    let nodes_text = fs::read_to_string(nodes_path)?;
    let mut chem_ids: HashMap<String, u32> = HashMap::new();
    let mut gene_ids: HashMap<String, u32> = HashMap::new();

    for (lineno, raw) in nodes_text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (id, kind) = match (cols.next(), cols.next(), cols.next()) {
            (Some(id), Some(kind), None) => (id, kind),
            _ => {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: format!("expected `node_id<TAB>kind`, got `{line}`"),
                })
            }
        };
        let table = match kind {
            "chemical" => &mut chem_ids,
            "gene" => &mut gene_ids,
            other => {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: format!("unknown node kind `{other}` (expected chemical|gene)"),
                })
            }
        };
        if table.contains_key(id) {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("duplicate node id `{id}`"),
            });
        }
        let next = table.len() as u32;
        table.insert(id.to_string(), next);
    }

    let edges_text = fs::read_to_string(edges_path)?;
    let mut builder = HeteroGraph::builder(chem_ids.len(), gene_ids.len());
    let mut raw_edges = 0usize;

    for (lineno, raw) in edges_text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (head, relation, tail) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(h), Some(r), Some(t), None) => (h, r, t),
            _ => {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: format!("expected `head_id<TAB>relation<TAB>tail_id`, got `{line}`"),
                })
            }
        };

        let lookup = |table: &HashMap<String, u32>, id: &str| -> Result<u32, GraphError> {
            table.get(id).copied().ok_or_else(|| GraphError::UnknownNode {
                line: lineno,
                id: id.to_string(),
            })
        };

        match relation {
            "increase" | "decrease" | "binding" | "affect" => {
                let rel = match relation {
                    "increase" => RelationType::Increase,
                    "decrease" => RelationType::Decrease,
                    "binding" => RelationType::Binding,
                    _ => RelationType::Affect,
                };
                // referential check first so a truly unknown id is not
                // misreported as a kind mismatch
                if !chem_ids.contains_key(head) && !gene_ids.contains_key(head) {
                    return Err(GraphError::UnknownNode {
                        line: lineno,
                        id: head.to_string(),
                    });
                }
                if !chem_ids.contains_key(tail) && !gene_ids.contains_key(tail) {
                    return Err(GraphError::UnknownNode {
                        line: lineno,
                        id: tail.to_string(),
                    });
                }
                let c = chem_ids.get(head).copied().ok_or_else(|| GraphError::Schema {
                    line: lineno,
                    msg: format!("head `{head}` of `{relation}` edge must be a chemical"),
                })?;
                let g = gene_ids.get(tail).copied().ok_or_else(|| GraphError::Schema {
                    line: lineno,
                    msg: format!("tail `{tail}` of `{relation}` edge must be a gene"),
                })?;
                builder.add_edge(rel, NodeId(c), NodeId(g))?;
            }
            "chem_chem" => {
                let a = lookup(&chem_ids, head)?;
                let b = lookup(&chem_ids, tail)?;
                builder.add_chem_chem(NodeId(a), NodeId(b))?;
            }
            "gene_gene" => {
                let a = lookup(&gene_ids, head)?;
                let b = lookup(&gene_ids, tail)?;
                builder.add_gene_gene(NodeId(a), NodeId(b))?;
            }
            other => {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: format!("unknown relation label `{other}`"),
                })
            }
        }
        raw_edges += 1;
    }

    let graph = builder.build();
    let deduped: usize = RelationType::ALL
        .iter()
        .map(|&r| graph.edges(r).len())
        .sum::<usize>()
        + graph.chem_chem_edges().len()
        + graph.gene_gene_edges().len();
    let summary = IngestSummary {
        n_chem: graph.n_chem(),
        n_gene: graph.n_gene(),
        edges_per_relation: std::array::from_fn(|r| {
            graph.edges(RelationType::from_index(r).unwrap()).len()
        }),
        chem_chem_edges: graph.chem_chem_edges().len(),
        gene_gene_edges: graph.gene_gene_edges().len(),
        duplicates_collapsed: raw_edges - deduped,
    };
    Ok((graph, summary))
}

/// Serialize a graph back into the nodes/edges TSV pair.
pub fn write_tsv(
    graph: &HeteroGraph,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<(), GraphError> {
    let mut nodes = String::from("# node_id\tkind\n");
    for c in 0..graph.n_chem() {
        nodes.push_str(&format!("c{c}\tchemical\n"));
    }
    for g in 0..graph.n_gene() {
        nodes.push_str(&format!("g{g}\tgene\n"));
    }
    fs::write(nodes_path, nodes)?;

    let mut edges = String::from("# head_id\trelation\ttail_id\n");
    for rel in RelationType::ALL {
        for &(c, g) in graph.edges(rel) {
            edges.push_str(&format!("c{c}\t{}\tg{g}\n", rel.as_str()));
        }
    }
    for &(a, b) in graph.chem_chem_edges() {
        edges.push_str(&format!("c{a}\tchem_chem\tc{b}\n"));
    }
    for &(a, b) in graph.gene_gene_edges() {
        edges.push_str(&format!("g{a}\tgene_gene\tg{b}\n"));
    }
    fs::write(edges_path, edges)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_files(nodes: &str, edges: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let nodes_path = dir.path().join("nodes.tsv");
        let edges_path = dir.path().join("edges.tsv");
        let mut f = fs::File::create(&nodes_path).unwrap();
        f.write_all(nodes.as_bytes()).unwrap();
        let mut f = fs::File::create(&edges_path).unwrap();
        f.write_all(edges.as_bytes()).unwrap();
        (dir, nodes_path, edges_path)
    }

    #[test]
    fn minimal_well_formed_input() {
        let (_d, n, e) = write_files("c1\tchemical\ng1\tgene\n", "c1\tincrease\tg1\n");
        let (graph, summary) = ingest_tsv(&n, &e).unwrap();
        assert_eq!(graph.n_chem(), 1);
        assert_eq!(graph.n_gene(), 1);
        assert_eq!(graph.edges(RelationType::Increase).len(), 1);
        assert_eq!(summary.edges_per_relation, [1, 0, 0, 0]);
    }

    #[test]
    fn duplicate_edge_collapses_and_is_counted() {
        let (_d, n, e) = write_files(
            "c1\tchemical\ng1\tgene\n",
            "c1\tincrease\tg1\nc1\tincrease\tg1\n",
        );
        let (graph, summary) = ingest_tsv(&n, &e).unwrap();
        assert_eq!(graph.edges(RelationType::Increase).len(), 1);
        assert_eq!(summary.duplicates_collapsed, 1);
    }

    #[test]
    fn gene_headed_polar_edge_is_schema_error() {
        let (_d, n, e) = write_files("c1\tchemical\ng1\tgene\n", "g1\tincrease\tc1\n");
        let err = ingest_tsv(&n, &e).unwrap_err();
        assert!(matches!(err, GraphError::Schema { line: 1, .. }), "{err}");
    }

    #[test]
    fn unknown_relation_names_line() {
        let (_d, n, e) = write_files(
            "c1\tchemical\ng1\tgene\n",
            "c1\tincrease\tg1\nc1\tsuppresses\tg1\n",
        );
        let err = ingest_tsv(&n, &e).unwrap_err();
        match err {
            GraphError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("suppresses"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_node_is_referential_error() {
        let (_d, n, e) = write_files("c1\tchemical\ng1\tgene\n", "c9\tincrease\tg1\n");
        let err = ingest_tsv(&n, &e).unwrap_err();
        assert!(matches!(err, GraphError::UnknownNode { .. }), "{err}");
    }

    #[test]
    fn comments_blank_lines_and_crlf() {
        let (_d, n, e) = write_files(
            "# header\r\nc1\tchemical\r\n\r\ng1\tgene\r\n",
            "# header\r\nc1\tbinding\tg1\r\n",
        );
        let (graph, _) = ingest_tsv(&n, &e).unwrap();
        assert_eq!(graph.edges(RelationType::Binding).len(), 1);
    }

    #[test]
    fn homogeneous_edges_ingest() {
        let (_d, n, e) = write_files(
            "c1\tchemical\nc2\tchemical\ng1\tgene\ng2\tgene\n",
            "c1\tincrease\tg1\nc1\tchem_chem\tc2\ng1\tgene_gene\tg2\n",
        );
        let (graph, summary) = ingest_tsv(&n, &e).unwrap();
        assert_eq!(graph.chem_chem_edges().len(), 1);
        assert_eq!(graph.gene_gene_edges().len(), 1);
        assert_eq!(summary.chem_chem_edges, 1);
    }

    #[test]
    fn roundtrip_through_write_tsv() {
        let (_d, n, e) = write_files(
            "c1\tchemical\nc2\tchemical\ng1\tgene\n",
            "c1\tincrease\tg1\nc2\tdecrease\tg1\nc1\tchem_chem\tc2\n",
        );
        let (graph, _) = ingest_tsv(&n, &e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let n2 = dir.path().join("nodes.tsv");
        let e2 = dir.path().join("edges.tsv");
        write_tsv(&graph, &n2, &e2).unwrap();
        let (again, _) = ingest_tsv(&n2, &e2).unwrap();
        for rel in RelationType::ALL {
            assert_eq!(graph.edges(rel), again.edges(rel));
        }
        assert_eq!(graph.chem_chem_edges(), again.chem_chem_edges());
    }
}
