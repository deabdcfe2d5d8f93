use crate::error::{Error, Result};
use crate::inference::maxflow::FlowGraph;
use crate::inference::EnergyMaps;
use crate::model::second_differences;
use crate::scalar::Scalar;

/// Flow network whose minimum cut plus `offset` is the minimum energy.
///
/// Node `i < num_cells` is cell `i`; the source side of the cut is label 1.
/// Every clique contributes `K - 1` auxiliary nodes after the cells.
#[derive(Clone, Debug)]
pub struct CutGraph<T> {
    pub graph: FlowGraph<T>,
    pub offset: T,
    pub num_cells: usize,
}

impl<T: Scalar> CutGraph<T> {
    /// Node count including the two terminals.
    pub fn node_count(&self) -> usize {
        self.graph.num_nodes() + 2
    }
}

/// Builds the cut graph for `maps`.
///
/// The clique term is written as `a_1 m + b_1 + Σ_{k≥2} min(0, c_k m + d_k)`
/// over the visible count `m`, with `c_k ≤ 0` and `d_k ≥ 0` exactly when the
/// weights are concave; each `min` term becomes one auxiliary node.
pub fn build_graph<T: Scalar>(maps: &EnergyMaps<T>) -> Result<CutGraph<T>> {
    let n = maps.num_cells();
    let k = maps.hop.len() - 1;
    let scale = maps.hop.iter().fold(T::one(), |acc, &w| acc.max(w.abs()));
    let tol = T::sign_tolerance() * scale;
    if maps.pairwise < -T::sign_tolerance() * (T::one() + maps.pairwise.abs()) {
        return Err(Error::Representability(format!(
            "pairwise weight {} is negative",
            maps.pairwise
        )));
    }
    let d2 = second_differences(&maps.hop);
    if let Some((j, d)) = d2.iter().enumerate().find(|(_, &d)| d > tol) {
        return Err(Error::Representability(format!(
            "clique weights not concave: second difference {} at index {} is positive",
            d,
            j + 1
        )));
    }
    let pairwise = maps.pairwise.max(T::zero());
    let d2: Vec<T> = d2.into_iter().map(|d| d.min(T::zero())).collect();

    let mut g = FlowGraph::new(n);
    let mut offset = maps.constant;
    let mut cost1 = maps.f.clone();
    let cost0: Vec<T> = (0..n).map(|i| maps.b[i] + maps.r[i]).collect();

    let mut aux = Vec::new();
    for clique in &maps.cliques {
        let m = T::of_usize(clique.len());
        let ratio = T::of_usize(k) / m;
        let first_slope = (maps.hop[1] - maps.hop[0]) * ratio;
        for &i in clique {
            cost1[i] += first_slope;
        }
        offset += maps.hop[0];
        for (idx, &d) in d2.iter().enumerate() {
            let step = idx + 2;
            let slope = -(d * ratio);
            let intercept = -(T::of_usize(step - 1) * d);
            aux.push((clique, slope, intercept - slope * m));
        }
    }

    for i in 0..n {
        let low = cost1[i].min(cost0[i]);
        offset += low;
        g.add_tweights(i, cost0[i] - low, cost1[i] - low);
    }
    for (i, j) in maps.edges() {
        g.add_edge(i, j, pairwise, pairwise);
    }
    for (clique, slope, e) in aux {
        let z = g.add_node();
        for &i in clique {
            g.add_edge(z, i, slope, T::zero());
        }
        if e >= T::zero() {
            g.add_tweights(z, T::zero(), e);
        } else {
            offset += e;
            g.add_tweights(z, -e, T::zero());
        }
    }
    Ok(CutGraph {
        graph: g,
        offset,
        num_cells: n,
    })
}

/// Runs max-flow; returns the flow value and, per non-terminal node, whether
/// it stays on the source side.
pub fn mincut<T: Scalar>(g: &mut CutGraph<T>) -> (T, Vec<bool>) {
    let flow = g.graph.maxflow();
    (flow, g.graph.source_side())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViewpointShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn maps(w: usize, h: usize) -> EnergyMaps<f64> {
        let n = w * h;
        EnergyMaps {
            shape: ViewpointShape::new(w, h).unwrap(),
            f: vec![0.0; n],
            b: vec![0.0; n],
            r: vec![0.0; n],
            constant: 0.0,
            pairwise: 0.0,
            hop: vec![0.0; 5],
            cliques: vec![],
        }
    }

    fn labellings(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0..1usize << n).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    fn brute_min(m: &EnergyMaps<f64>) -> f64 {
        labellings(m.num_cells()).map(|v| m.energy(&v)).fold(f64::INFINITY, f64::min)
    }

    fn concave_hop(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut w = vec![rng.gen_range(-2.0..2.0)];
        let mut step: f64 = rng.gen_range(-2.0..3.0);
        for _ in 0..4 {
            let last = *w.last().unwrap();
            w.push(last + step);
            step -= rng.gen_range(0.0..1.5);
        }
        w
    }

    #[test]
    fn decoupled_cells_take_cheaper_label() {
        let mut m = maps(3, 1);
        m.f = vec![1.0, -1.0, 0.5];
        m.b = vec![0.0, 0.0, 2.0];
        m.r = vec![0.5, 0.5, -2.0];
        let mut g = build_graph(&m).unwrap();
        let (flow, side) = mincut(&mut g);
        assert_eq!(&side[..3], &[false, true, false]);
        assert!((flow + g.offset - (0.5 - 1.0 + 0.0)).abs() < 1e-12);
    }

    #[test]
    fn strong_pairwise_forces_joint_label() {
        let mut m = maps(2, 1);
        m.f = vec![1.0, -3.0];
        m.b = vec![0.0, 0.0];
        m.pairwise = 100.0;
        let mut g = build_graph(&m).unwrap();
        let (flow, side) = mincut(&mut g);
        assert_eq!(&side[..2], &[true, true]);
        assert!((flow + g.offset - brute_min(&m)).abs() < 1e-9);
        assert!((brute_min(&m) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn node_count_includes_auxiliaries_and_terminals() {
        let mut m = maps(3, 3);
        m.cliques = vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7, 8]];
        let g = build_graph(&m).unwrap();
        assert_eq!(g.node_count(), 9 + 3 * 3 + 2);
    }

    #[test]
    fn non_submodular_weights_are_rejected() {
        let mut m = maps(2, 2);
        m.pairwise = -0.5;
        assert!(matches!(build_graph(&m), Err(Error::Representability(_))));
        let mut m = maps(2, 2);
        m.hop = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let err = build_graph(&m).unwrap_err().to_string();
        assert!(err.contains("concave"), "{err}");
    }

    #[test]
    fn random_cliqued_boxes_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (w, h) in [(2, 2), (3, 2), (3, 3), (4, 3)] {
            for _ in 0..40 {
                let mut m = maps(w, h);
                let n = w * h;
                for i in 0..n {
                    m.f[i] = rng.gen_range(-2.0..2.0);
                    m.b[i] = rng.gen_range(-2.0..2.0);
                    m.r[i] = rng.gen_range(-1.0..1.0);
                }
                m.constant = rng.gen_range(-1.0..1.0);
                m.pairwise = rng.gen_range(0.0..1.0);
                m.hop = concave_hop(&mut rng);
                let mut ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
                ids[0] = 0;
                m.cliques = (0..3)
                    .map(|c| (0..n).filter(|&i| ids[i] == c).collect::<Vec<_>>())
                    .filter(|c| !c.is_empty())
                    .collect();
                let mut g = build_graph(&m).unwrap();
                let (flow, side) = mincut(&mut g);
                let best = brute_min(&m);
                assert!((flow + g.offset - best).abs() < 1e-9, "{} vs {}", flow + g.offset, best);
                assert!((m.energy(&side[..n]) - best).abs() < 1e-9);
            }
        }
    }
}
