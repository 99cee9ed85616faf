//! JSON files for CRAGs, features, models, costs, solutions and metrics.
//!
//! Candidates are keyed by their decimal id and edges by `"i-j"` with
//! `i < j`. Leaf pixels are stored as row runs with a half-open column range
//! `[col_start, col_end)`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cmc_core::costmodel::CostTable;
use cmc_core::crag::{build_crag, CandidateSpec};
use cmc_core::eval::{Detection, Voi};
use cmc_core::features::FeatureSet;
use cmc_core::forest::{Forest, Tree, TreeNode};
use cmc_core::{CandidateId, Crag, Solution};

use crate::error::{Error, Result, Stage};

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        stage: Stage::Output,
        path: path.into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        stage: Stage::Output,
        path: path.into(),
        source,
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path, stage: Stage) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        stage,
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        stage,
        path: path.into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub row: u32,
    pub col_start: u32,
    pub col_end: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateJson {
    pub id: u32,
    pub level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<Run>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CragJson {
    pub width: u32,
    pub height: u32,
    pub candidates: Vec<CandidateJson>,
    pub adjacency: Vec<[u32; 2]>,
    pub subset: Vec<[u32; 2]>,
}

fn runs(pixels: impl Iterator<Item = (u32, u32)>) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (row, col) in pixels {
        match out.last_mut() {
            Some(r) if r.row == row && r.col_end == col => r.col_end += 1,
            _ => out.push(Run {
                row,
                col_start: col,
                col_end: col + 1,
            }),
        }
    }
    out
}

impl CragJson {
    pub fn from_crag(crag: &Crag) -> Self {
        let candidates = (0..crag.num_candidates())
            .map(|i| {
                let (children, pixels) = if crag.is_leaf(i) {
                    (None, Some(runs(crag.pixel_coords(i))))
                } else {
                    (
                        Some(crag.children(i).iter().map(|&c| crag.id(c).0).collect()),
                        None,
                    )
                };
                CandidateJson {
                    id: crag.id(i).0,
                    level: crag.level(i),
                    children,
                    pixels,
                }
            })
            .collect();
        let adjacency = crag.edges().iter().map(|e| [e.a.0, e.b.0]).collect();
        let subset = (0..crag.num_candidates())
            .filter_map(|i| crag.parent(i).map(|p| [crag.id(i).0, crag.id(p).0]))
            .collect();
        CragJson {
            width: crag.width(),
            height: crag.height(),
            candidates,
            adjacency,
            subset,
        }
    }

    pub fn to_crag(&self) -> Result<Crag, String> {
        let mut specs = Vec::with_capacity(self.candidates.len());
        for c in &self.candidates {
            let spec = match (&c.pixels, &c.children) {
                (Some(runs), None) => {
                    let mut px = Vec::new();
                    for r in runs {
                        if r.col_end <= r.col_start {
                            return Err(format!("candidate {}: empty run in row {}", c.id, r.row));
                        }
                        px.extend((r.col_start..r.col_end).map(|col| (r.row, col)));
                    }
                    CandidateSpec::leaf(c.id, px)
                }
                (None, Some(_)) => CandidateSpec::merged(c.id, c.level),
                _ => {
                    return Err(format!(
                        "candidate {} needs exactly one of pixels or children",
                        c.id
                    ))
                }
            };
            specs.push(spec);
        }
        let adjacency: Vec<_> = self
            .adjacency
            .iter()
            .map(|&[a, b]| (CandidateId(a), CandidateId(b)))
            .collect();
        let subset: Vec<_> = self
            .subset
            .iter()
            .map(|&[c, p]| (CandidateId(c), CandidateId(p)))
            .collect();
        let crag = build_crag(specs, &adjacency, &subset, self.width, self.height)
            .map_err(|e| e.to_string())?;
        for c in &self.candidates {
            if let Some(children) = &c.children {
                let i = crag
                    .index_of(CandidateId(c.id))
                    .expect("candidate was built");
                let mut listed = children.clone();
                listed.sort_unstable();
                let actual: Vec<u32> = crag.children(i).iter().map(|&k| crag.id(k).0).collect();
                if listed != actual {
                    return Err(format!(
                        "candidate {}: children disagree with subset edges",
                        c.id
                    ));
                }
            }
        }
        Ok(crag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub y: BTreeMap<String, u8>,
    pub m: BTreeMap<String, u8>,
    pub objective: f64,
}

fn node_map<T: Copy>(crag: &Crag, values: &[T]) -> BTreeMap<String, T> {
    (0..crag.num_candidates())
        .map(|i| (crag.id(i).0.to_string(), values[i]))
        .collect()
}

fn edge_map<T: Copy>(crag: &Crag, values: &[T]) -> BTreeMap<String, T> {
    crag.edges()
        .iter()
        .zip(values)
        .map(|(e, &v)| (e.key(), v))
        .collect()
}

fn node_values<T: Clone>(
    crag: &Crag,
    map: &BTreeMap<String, T>,
    what: &str,
) -> Result<Vec<T>, String> {
    if map.len() != crag.num_candidates() {
        return Err(format!(
            "{what}: {} candidate entries, CRAG has {}",
            map.len(),
            crag.num_candidates()
        ));
    }
    (0..crag.num_candidates())
        .map(|i| {
            let key = crag.id(i).0.to_string();
            map.get(&key)
                .cloned()
                .ok_or_else(|| format!("{what}: missing candidate {key}"))
        })
        .collect()
}

fn edge_values<T: Clone>(
    crag: &Crag,
    map: &BTreeMap<String, T>,
    what: &str,
) -> Result<Vec<T>, String> {
    if map.len() != crag.num_edges() {
        return Err(format!(
            "{what}: {} edge entries, CRAG has {}",
            map.len(),
            crag.num_edges()
        ));
    }
    crag.edges()
        .iter()
        .map(|e| {
            map.get(&e.key())
                .cloned()
                .ok_or_else(|| format!("{what}: missing edge {}", e.key()))
        })
        .collect()
}

fn bits(values: Vec<u8>, what: &str) -> Result<Vec<bool>, String> {
    values
        .into_iter()
        .map(|v| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(format!("{what}: values must be 0 or 1, got {v}")),
        })
        .collect()
}

impl SolutionJson {
    pub fn from_solution(crag: &Crag, s: &Solution) -> Self {
        let y: Vec<u8> = s.y.iter().map(|&b| b as u8).collect();
        let m: Vec<u8> = s.m.iter().map(|&b| b as u8).collect();
        SolutionJson {
            y: node_map(crag, &y),
            m: edge_map(crag, &m),
            objective: s.objective,
        }
    }

    pub fn to_solution(&self, crag: &Crag) -> Result<Solution, String> {
        Ok(Solution {
            y: bits(node_values(crag, &self.y, "y")?, "y")?,
            m: bits(edge_values(crag, &self.m, "m")?, "m")?,
            objective: self.objective,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostsJson {
    pub f: BTreeMap<String, f64>,
    pub g: BTreeMap<String, f64>,
}

impl CostsJson {
    pub fn from_costs(crag: &Crag, costs: &CostTable) -> Self {
        CostsJson {
            f: node_map(crag, &costs.f),
            g: edge_map(crag, &costs.g),
        }
    }

    pub fn to_costs(&self, crag: &Crag) -> Result<CostTable, String> {
        let f = node_values(crag, &self.f, "f")?;
        let g = edge_values(crag, &self.g, "g")?;
        CostTable::new(crag, f, g).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaJson {
    pub node: Vec<String>,
    pub edge: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesJson {
    pub schema: SchemaJson,
    pub nodes: BTreeMap<String, Vec<f64>>,
    pub edges: BTreeMap<String, Vec<f64>>,
}

impl FeaturesJson {
    pub fn from_features(crag: &Crag, fs: &FeatureSet) -> Self {
        FeaturesJson {
            schema: SchemaJson {
                node: fs.node_schema.clone(),
                edge: fs.edge_schema.clone(),
            },
            nodes: (0..crag.num_candidates())
                .map(|i| (crag.id(i).0.to_string(), fs.nodes[i].clone()))
                .collect(),
            edges: crag
                .edges()
                .iter()
                .zip(&fs.edges)
                .map(|(e, v)| (e.key(), v.clone()))
                .collect(),
        }
    }

    pub fn to_features(&self, crag: &Crag) -> Result<FeatureSet, String> {
        let nodes = node_values(crag, &self.nodes, "nodes")?;
        let edges = edge_values(crag, &self.edges, "edges")?;
        if let Some(row) = nodes.iter().find(|r| r.len() != self.schema.node.len()) {
            return Err(format!(
                "node row has {} values, schema has {}",
                row.len(),
                self.schema.node.len()
            ));
        }
        if let Some(row) = edges.iter().find(|r| r.len() != self.schema.edge.len()) {
            return Err(format!(
                "edge row has {} values, schema has {}",
                row.len(),
                self.schema.edge.len()
            ));
        }
        Ok(FeatureSet {
            node_schema: self.schema.node.clone(),
            edge_schema: self.schema.edge.clone(),
            nodes,
            edges,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeJson {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestJson {
    pub n_features: usize,
    pub seed: u64,
    pub trees: Vec<Vec<NodeJson>>,
}

impl ForestJson {
    pub fn from_forest(forest: &Forest) -> Self {
        let trees = forest
            .trees
            .iter()
            .map(|t| {
                t.nodes
                    .iter()
                    .map(|n| match *n {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeJson::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        },
                        TreeNode::Leaf { probability } => NodeJson::Leaf { probability },
                    })
                    .collect()
            })
            .collect();
        ForestJson {
            n_features: forest.n_features,
            seed: forest.seed,
            trees,
        }
    }

    pub fn to_forest(&self) -> Result<Forest, String> {
        let trees = self
            .trees
            .iter()
            .map(|nodes| Tree {
                nodes: nodes
                    .iter()
                    .map(|n| match *n {
                        NodeJson::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        },
                        NodeJson::Leaf { probability } => TreeNode::Leaf { probability },
                    })
                    .collect(),
            })
            .collect();
        let forest = Forest {
            trees,
            n_features: self.n_features,
            seed: self.seed,
        };
        if !forest.is_well_formed() || forest.trees.iter().any(|t| t.nodes.is_empty()) {
            return Err("malformed forest".into());
        }
        Ok(forest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub schema: SchemaJson,
    pub node: ForestJson,
    pub edge: ForestJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    pub voi_split: f64,
    pub voi_merge: f64,
    pub voi: f64,
    pub rand: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl MetricsJson {
    pub fn new(voi: Voi, rand: f64, det: Detection) -> Self {
        MetricsJson {
            voi_split: voi.split,
            voi_merge: voi.merge,
            voi: voi.total,
            rand,
            precision: det.precision,
            recall: det.recall,
            f_score: det.f_score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmc_core::fixtures::quad;

    #[test]
    fn crag_round_trip() {
        let crag = quad::crag();
        let json = CragJson::from_crag(&crag);
        let a = json.candidates.iter().find(|c| c.id == quad::A).unwrap();
        assert_eq!(
            a.pixels.as_deref(),
            Some(
                &[Run {
                    row: 0,
                    col_start: 0,
                    col_end: 2
                }][..]
            )
        );
        let g = json.candidates.iter().find(|c| c.id == quad::G).unwrap();
        assert_eq!(g.children.as_deref(), Some(&[quad::E, quad::F][..]));
        let text = serde_json::to_string(&json).unwrap();
        let back: CragJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, json);
        let rebuilt = back.to_crag().unwrap();
        assert_eq!(CragJson::from_crag(&rebuilt), json);
    }

    #[test]
    fn crag_rejects_inconsistent_children() {
        let mut json = CragJson::from_crag(&quad::crag());
        let g = json
            .candidates
            .iter_mut()
            .find(|c| c.id == quad::G)
            .unwrap();
        g.children = Some(vec![quad::E]);
        assert!(json.to_crag().is_err());
        let g = json
            .candidates
            .iter_mut()
            .find(|c| c.id == quad::G)
            .unwrap();
        g.children = None;
        assert!(json.to_crag().is_err());
    }

    #[test]
    fn solution_round_trip() {
        let crag = quad::crag();
        let mut s = quad::assignment(&crag, &[quad::A, quad::B], &[(quad::A, quad::B)]);
        s.objective = -1.25;
        let json = SolutionJson::from_solution(&crag, &s);
        assert_eq!(json.m["1-2"], 1);
        assert_eq!(json.y["5"], 0);
        let text = serde_json::to_string(&json).unwrap();
        let back: SolutionJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_solution(&crag).unwrap(), s);

        let mut bad = json.clone();
        bad.y.insert("1".into(), 2);
        assert!(bad.to_solution(&crag).is_err());
        let mut bad = json;
        bad.m.remove("1-2");
        assert!(bad.to_solution(&crag).is_err());
    }

    #[test]
    fn costs_round_trip_exactly() {
        let crag = quad::crag();
        let f: Vec<f64> = (0..crag.num_candidates())
            .map(|i| (i as f64 + 0.1).ln() / 3.0)
            .collect();
        let g: Vec<f64> = (0..crag.num_edges())
            .map(|e| -(e as f64 + 0.7).sqrt())
            .collect();
        let costs = CostTable::new(&crag, f, g).unwrap();
        let text = serde_json::to_string(&CostsJson::from_costs(&crag, &costs)).unwrap();
        let back: CostsJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_costs(&crag).unwrap(), costs);
    }

    #[test]
    fn forest_round_trip() {
        let forest = Forest {
            trees: vec![Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 1,
                        threshold: 0.1 + 0.2,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf {
                        probability: 1.0 / 3.0,
                    },
                    TreeNode::Leaf { probability: 1.0 },
                ],
            }],
            n_features: 2,
            seed: 9,
        };
        let text = serde_json::to_string(&ForestJson::from_forest(&forest)).unwrap();
        assert!(text.contains("\"feature\":1"));
        let back: ForestJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_forest().unwrap(), forest);
        let mut broken = back;
        broken.trees[0][0] = NodeJson::Split {
            feature: 5,
            threshold: 0.0,
            left: 1,
            right: 2,
        };
        assert!(broken.to_forest().is_err());
    }
}
