//! The dominant-label graph: which class each class's fooled samples
//! flow into under a universal perturbation.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::models::{Model, SampleSet};
use crate::numerics::Tensor;
use crate::universal::fooling_rate;

/// Directed edge `from -> to`: the modal fooled-into label of class
/// `from`, with the number of fooled samples that landed on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEdge {
    pub from: usize,
    pub to: usize,
    pub count: usize,
}

/// Per-class sample flow under the perturbation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFlow {
    pub class: usize,
    pub total: usize,
    pub fooled: usize,
}

/// A weakly connected component of the edge set, with its dominant label
/// (the most common edge target inside the component).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub classes: Vec<usize>,
    pub dominant_label: usize,
}

#[derive(Debug, Clone)]
pub struct LabelGraph {
    pub edges: Vec<LabelEdge>,
    pub flows: Vec<ClassFlow>,
    pub components: Vec<Component>,
}

/// Builds the label graph of `v` on `valset`. Classes are the model's
/// clean predictions; a class gets one outgoing edge to the label the
/// majority of its fooled samples move to (ties toward the lowest index).
/// Classes with no fooled samples get no edge.
pub fn build_label_graph(model: &Model, valset: &SampleSet, v: &Tensor) -> Result<LabelGraph> {
    let report = fooling_rate(model, valset, v)?;

    // class -> (target label -> count), plus totals per clean class
    let mut targets: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut totals: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&(clean, perturbed), &flip) in report.label_pairs.iter().zip(&report.flipped) {
        let entry = totals.entry(clean).or_insert((0, 0));
        entry.0 += 1;
        if flip {
            entry.1 += 1;
            *targets.entry(clean).or_default().entry(perturbed).or_insert(0) += 1;
        }
    }

    let mut edges = Vec::new();
    for (&class, map) in &targets {
        // Modal target; BTreeMap order makes ties resolve to the lowest label.
        let (&to, &count) = map.iter().max_by_key(|(_, &c)| c).unwrap();
        edges.push(LabelEdge {
            from: class,
            to,
            count,
        });
    }

    let flows = totals
        .iter()
        .map(|(&class, &(total, fooled))| ClassFlow {
            class,
            total,
            fooled,
        })
        .collect();

    let components = connected_components(&edges);
    Ok(LabelGraph {
        edges,
        flows,
        components,
    })
}

/// Weakly connected components of the edge set.
fn connected_components(edges: &[LabelEdge]) -> Vec<Component> {
    let mut vertices: Vec<usize> = edges
        .iter()
        .flat_map(|e| [e.from, e.to])
        .collect();
    vertices.sort_unstable();
    vertices.dedup();
    let index: BTreeMap<usize, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();

    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for e in edges {
        let (a, b) = (index[&e.from], index[&e.to]);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &v) in vertices.iter().enumerate() {
        groups.entry(find(&mut parent, i)).or_default().push(v);
    }

    groups
        .into_values()
        .map(|classes| {
            // Dominant label: heaviest in-flow (edge-count sum) among the
            // component's edge targets, ties toward the lowest label.
            let mut inflow: BTreeMap<usize, usize> = BTreeMap::new();
            for e in edges {
                if classes.contains(&e.from) {
                    *inflow.entry(e.to).or_insert(0) += e.count;
                }
            }
            let (&dominant_label, _) = inflow.iter().max_by_key(|(_, &c)| c).unwrap();
            Component {
                classes,
                dominant_label,
            }
        })
        .collect()
}

impl LabelGraph {
    /// DOT rendering: a digraph with edges annotated by fooled counts.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph label_flow {\n");
        let mut vertices: Vec<usize> = self
            .edges
            .iter()
            .flat_map(|e| [e.from, e.to])
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        for v in vertices {
            out.push_str(&format!("    c{v} [label=\"class {v}\"];\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "    c{} -> c{} [label=\"{}\"];\n",
                e.from, e.to, e.count
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, Layer, Model};

    /// Affine model over 1D with per-class logits w_k x + b_k.
    fn affine_1d(w: Vec<f64>, b: Vec<f64>) -> Model {
        let c = w.len();
        Model::new(vec![Layer::new(
            Tensor::matrix(c, 1, w).unwrap(),
            Tensor::vector(b).unwrap(),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn set_1d(points: Vec<f64>) -> SampleSet {
        let n = points.len();
        SampleSet::new(
            points
                .into_iter()
                .map(|p| Tensor::vector(vec![p]).unwrap())
                .collect(),
            vec![0; n],
            "1d",
        )
        .unwrap()
    }

    #[test]
    fn two_class_flip_gives_single_edge() {
        // class 0 for x < 0, class 1 for x > 0.
        let model = affine_1d(vec![-1.0, 1.0], vec![0.0, 0.0]);
        let valset = set_1d(vec![-0.5, -1.0, -0.2]);
        let v = Tensor::vector(vec![2.0]).unwrap();
        let graph = build_label_graph(&model, &valset, &v).unwrap();
        assert_eq!(graph.edges, vec![LabelEdge { from: 0, to: 1, count: 3 }]);
        assert_eq!(graph.components.len(), 1);
        assert_eq!(graph.components[0].dominant_label, 1);
    }

    #[test]
    fn zero_perturbation_has_empty_edge_set() {
        let model = affine_1d(vec![-1.0, 1.0], vec![0.0, 0.0]);
        let valset = set_1d(vec![-0.5, 0.5]);
        let graph = build_label_graph(&model, &valset, &Tensor::zeros(vec![1])).unwrap();
        assert!(graph.edges.is_empty());
        assert!(graph.components.is_empty());
    }

    #[test]
    fn attractor_class_collects_multiple_edges() {
        // Four intervals; class 3 owns everything right of x = 3, so a
        // +3 shift funnels classes 1 and 2 (and part of 0) into it.
        let model = affine_1d(vec![-10.0, 2.0, 4.0, 9.0], vec![0.0, -1.0, -5.0, -20.0]);
        // Regions roughly: 0 for x < ~0, then 1, then 2, then 3 for x > 3.
        let valset = set_1d(vec![1.0, 1.2, 2.4, 2.6, -0.5]);
        let v = Tensor::vector(vec![3.0]).unwrap();
        let graph = build_label_graph(&model, &valset, &v).unwrap();
        let targets: Vec<usize> = graph.edges.iter().map(|e| e.to).collect();
        let shared = targets.iter().filter(|&&t| t == 3).count();
        assert!(shared >= 2, "expected an attractor, edges: {:?}", graph.edges);
    }

    #[test]
    fn out_degree_at_most_one_and_counts_match_modal_target() {
        let model = affine_1d(vec![-1.0, 1.0], vec![0.0, 0.0]);
        let valset = set_1d(vec![-0.5, -1.0, 0.7]);
        let v = Tensor::vector(vec![2.0]).unwrap();
        let graph = build_label_graph(&model, &valset, &v).unwrap();
        let mut sources: Vec<usize> = graph.edges.iter().map(|e| e.from).collect();
        sources.dedup();
        assert_eq!(sources.len(), graph.edges.len(), "duplicate out-edges");
        for e in &graph.edges {
            let flow = graph.flows.iter().find(|f| f.class == e.from).unwrap();
            assert!(e.count <= flow.fooled);
        }
    }

    #[test]
    fn dot_rendering_lists_edges_with_counts() {
        let graph = LabelGraph {
            edges: vec![LabelEdge { from: 0, to: 1, count: 12 }],
            flows: vec![],
            components: vec![],
        };
        let dot = graph.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("c0 -> c1 [label=\"12\"]"), "{dot}");
    }
}
