use crate::csg::{CsgDomain, CsgExpr};
use crate::mdp::{SynthState, ValueFn};

/// Ground-truth value for a known target program: `v = 1` when the scope
/// entries are pairwise disjoint subtrees of the target (so some completion
/// rebuilds it), `v = epsilon` otherwise.
pub struct SubtreeOracle {
    /// Pre-order nodes of the target with the end of each node's subtree range.
    nodes: Vec<(CsgExpr, usize)>,
    log_epsilon: f64,
}

impl SubtreeOracle {
    pub fn new(target: &CsgExpr, epsilon: f64) -> Self {
        fn walk(e: &CsgExpr, out: &mut Vec<(CsgExpr, usize)>) {
            let at = out.len();
            out.push((e.clone(), 0));
            if let Some((a, b)) = e.children() {
                walk(a, out);
                walk(b, out);
            }
            out[at].1 = out.len();
        }
        let mut nodes = Vec::new();
        walk(target, &mut nodes);
        SubtreeOracle { nodes, log_epsilon: epsilon.ln() }
    }

    /// Whether `entries` can be assigned to pairwise disjoint target subtrees.
    pub fn on_target(&self, entries: &[&CsgExpr]) -> bool {
        fn assign(oracle: &SubtreeOracle, entries: &[&CsgExpr], used: &mut Vec<(usize, usize)>) -> bool {
            let Some((first, rest)) = entries.split_first() else { return true };
            for (i, (node, end)) in oracle.nodes.iter().enumerate() {
                let overlaps = used.iter().any(|&(s, e)| i < e && s < *end);
                if !overlaps && node == *first {
                    used.push((i, *end));
                    if assign(oracle, rest, used) {
                        return true;
                    }
                    used.pop();
                }
            }
            false
        }
        assign(self, entries, &mut Vec::new())
    }
}

impl ValueFn<CsgDomain> for SubtreeOracle {
    fn log_value(&self, _domain: &CsgDomain, state: &SynthState<CsgDomain>) -> f64 {
        let entries: Vec<&CsgExpr> = state.scope.iter().map(|e| &*e.expr).collect();
        if self.on_target(&entries) {
            0.0
        } else {
            self.log_epsilon
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_subtrees_only() {
        let a = CsgExpr::Circle { r: 4, x: 8, y: 8 };
        let b = CsgExpr::Circle { r: 4, x: 16, y: 8 };
        let c = CsgExpr::Circle { r: 8, x: 16, y: 16 };
        let t = CsgExpr::difference(CsgExpr::union(a.clone(), b.clone()), c.clone());
        let o = SubtreeOracle::new(&t, 1e-6);
        assert!(o.on_target(&[]));
        assert!(o.on_target(&[&a, &c]));
        assert!(o.on_target(&[&c, &b, &a]));
        assert!(!o.on_target(&[&a, &a]));
        let ab = CsgExpr::union(a.clone(), b.clone());
        assert!(o.on_target(&[&ab, &c]));
        assert!(!o.on_target(&[&ab, &a]));
        assert!(!o.on_target(&[&CsgExpr::union(b, a)]));
        // a repeated subtree may be used once per occurrence
        let twice = CsgExpr::union(c.clone(), CsgExpr::difference(c.clone(), CsgExpr::Circle { r: 4, x: 0, y: 0 }));
        let o = SubtreeOracle::new(&twice, 1e-6);
        assert!(o.on_target(&[&c, &c]));
        assert!(!o.on_target(&[&c, &c, &c]));
    }
}
