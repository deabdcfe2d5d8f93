//! Boykov–Kolmogorov augmenting-path max-flow.
//!
//! Two search trees grow from the terminals; when they touch, the path is
//! augmented and the nodes cut off from their tree are re-adopted or freed.
//! Terminal arcs are stored per node as a single signed residual (positive:
//! from the source, negative: to the sink).

use std::collections::VecDeque;

use crate::scalar::Scalar;

const NONE: usize = usize::MAX;
const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Clone, Debug)]
struct Arc<T> {
    head: usize,
    next: usize,
    rcap: T,
}

#[derive(Clone, Debug)]
pub struct FlowGraph<T> {
    first: Vec<usize>,
    tr_cap: Vec<T>,
    arcs: Vec<Arc<T>>,
    flow: T,
    tree: Vec<Tree>,
    parent: Vec<usize>,
}

impl<T: Scalar> FlowGraph<T> {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            first: vec![NONE; num_nodes],
            tr_cap: vec![T::zero(); num_nodes],
            arcs: Vec::new(),
            flow: T::zero(),
            tree: Vec::new(),
            parent: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.first.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.first.push(NONE);
        self.tr_cap.push(T::zero());
        self.first.len() - 1
    }

    /// Adds capacity `source` on arc s→i and `sink` on arc i→t.
    pub fn add_tweights(&mut self, i: usize, source: T, sink: T) {
        debug_assert!(source >= T::zero() && sink >= T::zero());
        // Flow min(source, sink) is routed straight through i.
        let direct = source.min(sink);
        self.flow += direct;
        self.tr_cap[i] += source - sink;
    }

    /// Adds arc i→j with capacity `cap` and arc j→i with capacity `rev`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: T, rev: T) {
        debug_assert!(i != j && cap >= T::zero() && rev >= T::zero());
        let a = self.arcs.len();
        self.arcs.push(Arc {
            head: j,
            next: self.first[i],
            rcap: cap,
        });
        self.arcs.push(Arc {
            head: i,
            next: self.first[j],
            rcap: rev,
        });
        self.first[i] = a;
        self.first[j] = a + 1;
    }

    /// Runs max-flow and returns its value.
    pub fn maxflow(&mut self) -> T {
        let n = self.num_nodes();
        self.tree = vec![Tree::Free; n];
        self.parent = vec![NONE; n];
        let mut in_queue = vec![false; n];
        let mut active = VecDeque::new();
        for i in 0..n {
            if self.tr_cap[i] > T::zero() {
                self.tree[i] = Tree::Source;
            } else if self.tr_cap[i] < T::zero() {
                self.tree[i] = Tree::Sink;
            } else {
                continue;
            }
            self.parent[i] = TERMINAL;
            in_queue[i] = true;
            active.push_back(i);
        }
        let mut orphans = VecDeque::new();

        while let Some(i) = active.pop_front() {
            in_queue[i] = false;
            let side = self.tree[i];
            if side == Tree::Free {
                continue;
            }
            let mut meeting = NONE;
            let mut a = self.first[i];
            while a != NONE {
                let sister = a ^ 1;
                let j = self.arcs[a].head;
                let open = match side {
                    Tree::Source => self.arcs[a].rcap > T::zero(),
                    _ => self.arcs[sister].rcap > T::zero(),
                };
                if open {
                    match self.tree[j] {
                        Tree::Free => {
                            self.tree[j] = side;
                            self.parent[j] = sister;
                            if !in_queue[j] {
                                in_queue[j] = true;
                                active.push_back(j);
                            }
                        }
                        t if t != side => {
                            meeting = if side == Tree::Source { a } else { sister };
                            break;
                        }
                        _ => {}
                    }
                }
                a = self.arcs[a].next;
            }
            if meeting == NONE {
                continue;
            }
            self.augment(meeting, &mut orphans);
            self.adopt(&mut orphans, &mut active, &mut in_queue);
            if self.tree[i] != Tree::Free && !in_queue[i] {
                in_queue[i] = true;
                active.push_front(i);
            }
        }
        self.flow
    }

    /// Nodes reachable from the source in the residual graph.
    pub fn source_side(&self) -> Vec<bool> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.tr_cap[i] > T::zero()).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            let mut a = self.first[i];
            while a != NONE {
                let j = self.arcs[a].head;
                if !seen[j] && self.arcs[a].rcap > T::zero() {
                    seen[j] = true;
                    queue.push_back(j);
                }
                a = self.arcs[a].next;
            }
        }
        seen
    }

    /// Tail of arc `a` (the head of its sister).
    fn tail(&self, a: usize) -> usize {
        self.arcs[a ^ 1].head
    }

    fn augment(&mut self, middle: usize, orphans: &mut VecDeque<usize>) {
        let mut bottleneck = self.arcs[middle].rcap;
        let mut i = self.tail(middle);
        while self.parent[i] != TERMINAL {
            let a = self.parent[i];
            bottleneck = bottleneck.min(self.arcs[a ^ 1].rcap);
            i = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(self.tr_cap[i]);
        let mut j = self.arcs[middle].head;
        while self.parent[j] != TERMINAL {
            let a = self.parent[j];
            bottleneck = bottleneck.min(self.arcs[a].rcap);
            j = self.arcs[a].head;
        }
        bottleneck = bottleneck.min(-self.tr_cap[j]);

        self.arcs[middle].rcap -= bottleneck;
        self.arcs[middle ^ 1].rcap += bottleneck;
        let mut i = self.tail(middle);
        while self.parent[i] != TERMINAL {
            let a = self.parent[i];
            self.arcs[a].rcap += bottleneck;
            self.arcs[a ^ 1].rcap -= bottleneck;
            let next = self.arcs[a].head;
            if self.arcs[a ^ 1].rcap <= T::zero() {
                self.parent[i] = ORPHAN;
                orphans.push_back(i);
            }
            i = next;
        }
        self.tr_cap[i] -= bottleneck;
        if self.tr_cap[i] <= T::zero() {
            self.parent[i] = ORPHAN;
            orphans.push_back(i);
        }
        let mut j = self.arcs[middle].head;
        while self.parent[j] != TERMINAL {
            let a = self.parent[j];
            self.arcs[a].rcap -= bottleneck;
            self.arcs[a ^ 1].rcap += bottleneck;
            let next = self.arcs[a].head;
            if self.arcs[a].rcap <= T::zero() {
                self.parent[j] = ORPHAN;
                orphans.push_back(j);
            }
            j = next;
        }
        self.tr_cap[j] += bottleneck;
        if self.tr_cap[j] >= T::zero() {
            self.parent[j] = ORPHAN;
            orphans.push_back(j);
        }
        self.flow += bottleneck;
    }

    /// True when following parents from `j` reaches a terminal.
    fn rooted(&self, mut j: usize) -> bool {
        loop {
            match self.parent[j] {
                TERMINAL => return true,
                ORPHAN | NONE => return false,
                a => j = self.arcs[a].head,
            }
        }
    }

    fn adopt(&mut self, orphans: &mut VecDeque<usize>, active: &mut VecDeque<usize>, in_queue: &mut [bool]) {
        while let Some(i) = orphans.pop_front() {
            let side = self.tree[i];
            let mut a = self.first[i];
            let mut new_parent = NONE;
            while a != NONE {
                let j = self.arcs[a].head;
                let open = match side {
                    Tree::Source => self.arcs[a ^ 1].rcap > T::zero(),
                    _ => self.arcs[a].rcap > T::zero(),
                };
                if open && self.tree[j] == side && self.rooted(j) {
                    new_parent = a;
                    break;
                }
                a = self.arcs[a].next;
            }
            if new_parent != NONE {
                self.parent[i] = new_parent;
                continue;
            }
            let mut a = self.first[i];
            while a != NONE {
                let j = self.arcs[a].head;
                if self.tree[j] == side {
                    let open = match side {
                        Tree::Source => self.arcs[a ^ 1].rcap > T::zero(),
                        _ => self.arcs[a].rcap > T::zero(),
                    };
                    if open && !in_queue[j] {
                        in_queue[j] = true;
                        active.push_back(j);
                    }
                    let pj = self.parent[j];
                    if pj != TERMINAL && pj != ORPHAN && pj != NONE && self.arcs[pj].head == i {
                        self.parent[j] = ORPHAN;
                        orphans.push_back(j);
                    }
                }
                a = self.arcs[a].next;
            }
            self.tree[i] = Tree::Free;
            self.parent[i] = NONE;
        }
    }
}
