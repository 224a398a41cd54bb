//! Random CSG scenes, dead-subtree pruning and action recovery.

use std::sync::Arc;

use rand::Rng as _;

use crate::csg::{BitGrid, CsgDomain, CsgError, CsgExpr};
use crate::mdp::{Action, Domain, Rng};

/// A random primitive on the domain's lattice. 3D cubes have strictly
/// ordered corners and cylinders distinct end points.
pub fn sample_primitive(domain: &CsgDomain, rng: &mut Rng) -> CsgExpr {
    let terminals: Vec<u16> = (0..domain.union_id()).collect();
    loop {
        let production = terminals[rng.gen_range(0..terminals.len())];
        let schema = &domain.grammar().productions[production as usize];
        let params: Vec<u16> = schema.params.iter().map(|s| rng.gen_range(0..s.size) as u16).collect();
        let expr = domain
            .primitive_of(&Action::terminal(production, &params))
            .expect("terminal production");
        let ok = match expr {
            CsgExpr::Cube { x0, y0, z0, x1, y1, z1 } => x0 < x1 && y0 < y1 && z0 < z1,
            CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, .. } => (x0, y0, z0) != (x1, y1, z1),
            _ => true,
        };
        if ok {
            return expr;
        }
    }
}

fn catalan(n: usize) -> f64 {
    (0..n).fold(1.0, |c, k| c * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64)
}

/// A tree with exactly `leaves` primitives; shapes are uniform over all
/// binary trees with that many leaves and each combinator is union or
/// difference with equal probability.
pub fn sample_tree(domain: &CsgDomain, leaves: usize, rng: &mut Rng) -> CsgExpr {
    assert!(leaves >= 1, "a tree needs at least one leaf");
    if leaves == 1 {
        return sample_primitive(domain, rng);
    }
    let total = catalan(leaves - 1);
    let mut u = rng.gen::<f64>() * total;
    let mut left = leaves - 1;
    for i in 1..leaves {
        let w = catalan(i - 1) * catalan(leaves - i - 1);
        if u < w {
            left = i;
            break;
        }
        u -= w;
    }
    let a = sample_tree(domain, left, rng);
    let b = sample_tree(domain, leaves - left, rng);
    if rng.gen_bool(0.5) {
        CsgExpr::union(a, b)
    } else {
        CsgExpr::difference(a, b)
    }
}

/// Object count uniform over `1..=max_objects`, then [`sample_tree`].
pub fn sample_csg_program(domain: &CsgDomain, max_objects: usize, rng: &mut Rng) -> CsgExpr {
    let n = rng.gen_range(1..=max_objects.max(1));
    sample_tree(domain, n, rng)
}

/// Every tree obtained by one deletion: a combinator replaced by its left
/// child, or (for union) by its right child. Replacing a difference by its
/// left child deletes the subtracted subtree.
fn single_deletions(expr: &CsgExpr) -> Vec<CsgExpr> {
    let mut out = Vec::new();
    match expr {
        CsgExpr::Union(a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
            out.extend(single_deletions(a).into_iter().map(|x| CsgExpr::Union(Arc::new(x), Arc::clone(b))));
            out.extend(single_deletions(b).into_iter().map(|x| CsgExpr::Union(Arc::clone(a), Arc::new(x))));
        }
        CsgExpr::Difference(a, b) => {
            out.push((**a).clone());
            out.extend(single_deletions(a).into_iter().map(|x| CsgExpr::Difference(Arc::new(x), Arc::clone(b))));
            out.extend(single_deletions(b).into_iter().map(|x| CsgExpr::Difference(Arc::clone(a), Arc::new(x))));
        }
        _ => {}
    }
    out
}

/// Remove subtrees that do not affect the render, to a fixpoint of single
/// deletions checked against the renderer.
pub fn prune_dead_subtrees(domain: &CsgDomain, expr: &CsgExpr) -> Result<CsgExpr, CsgError> {
    let target = domain.render(expr)?;
    let mut current = expr.clone();
    'outer: loop {
        for candidate in single_deletions(&current) {
            if domain.render(&candidate)? == target {
                current = candidate;
                continue 'outer;
            }
        }
        return Ok(current);
    }
}

/// Canonical post-order, left-first action sequence building `expr`.
pub fn recover_csg_actions(domain: &CsgDomain, expr: &CsgExpr) -> Result<Vec<Action>, CsgError> {
    fn go(domain: &CsgDomain, e: &CsgExpr, base: usize, out: &mut Vec<Action>) -> Result<(), CsgError> {
        match e {
            CsgExpr::Union(a, b) | CsgExpr::Difference(a, b) => {
                go(domain, a, base, out)?;
                go(domain, b, base + 1, out)?;
                let id = if matches!(e, CsgExpr::Union(..)) { domain.union_id() } else { domain.difference_id() };
                out.push(Action::combinator(id, &[base as u16, base as u16 + 1]));
            }
            leaf => out.push(domain.primitive_action(leaf)?),
        }
        Ok(())
    }
    let mut out = Vec::with_capacity(expr.node_count());
    go(domain, expr, 0, &mut out)?;
    Ok(out)
}

/// One training scene: pruned program, its render and the action sequence.
#[derive(Clone, Debug)]
pub struct CsgSample {
    pub program: CsgExpr,
    pub spec: BitGrid,
    pub actions: Vec<Action>,
}

/// Sample, prune and linearize a scene with a nonempty render.
pub fn sample_csg_episode(domain: &CsgDomain, max_objects: usize, rng: &mut Rng) -> CsgSample {
    loop {
        let raw = sample_csg_program(domain, max_objects, rng);
        let program = prune_dead_subtrees(domain, &raw).expect("sampled tree matches the domain");
        let spec = domain.render(&program).expect("sampled tree matches the domain");
        if !spec.any() {
            continue;
        }
        let actions = recover_csg_actions(domain, &program).expect("sampled tree is on the lattice");
        return CsgSample { program, spec, actions };
    }
}

/// A scene whose pruned program has exactly `objects` primitives.
pub fn sample_csg_task(domain: &CsgDomain, objects: usize, rng: &mut Rng) -> CsgSample {
    loop {
        let raw = sample_tree(domain, objects, rng);
        let program = prune_dead_subtrees(domain, &raw).expect("sampled tree matches the domain");
        if program.leaves() != objects {
            continue;
        }
        let spec = domain.render(&program).expect("sampled tree matches the domain");
        if !spec.any() {
            continue;
        }
        let actions = recover_csg_actions(domain, &program).expect("sampled tree is on the lattice");
        return CsgSample { program, spec, actions };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::CsgConfig;
    use crate::mdp::{replay, reward, rng_from_seed};

    fn micro() -> CsgDomain {
        CsgDomain::new(CsgConfig::micro_2d()).unwrap()
    }

    #[test]
    fn single_object_has_no_combinators() {
        let d = micro();
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            assert!(sample_csg_program(&d, 1, &mut rng).is_primitive());
        }
    }

    #[test]
    fn trees_have_requested_leaves() {
        let d = CsgDomain::new(CsgConfig::full_2d()).unwrap();
        let mut rng = rng_from_seed(2);
        for n in 1..=13 {
            let t = sample_tree(&d, n, &mut rng);
            assert_eq!(t.leaves(), n);
            assert_eq!(t.node_count(), 2 * n - 1);
            assert!(t.on_lattice());
        }
    }

    #[test]
    fn shapes_are_uniform() {
        // three leaves: two shapes, each with probability 1/2
        let d = micro();
        let mut rng = rng_from_seed(3);
        let left_heavy = (0..4000)
            .filter(|_| {
                let t = sample_tree(&d, 3, &mut rng);
                t.children().unwrap().0.leaves() == 2
            })
            .count();
        assert!((1800..2200).contains(&left_heavy), "{left_heavy}");
    }

    #[test]
    fn pruning_examples() {
        let d = CsgDomain::new(CsgConfig::full_2d()).unwrap();
        let a = CsgExpr::Circle { r: 4, x: 8, y: 8 };
        let far = CsgExpr::Circle { r: 2, x: 28, y: 28 };
        assert_eq!(prune_dead_subtrees(&d, &CsgExpr::difference(a.clone(), far)).unwrap(), a);
        assert_eq!(prune_dead_subtrees(&d, &CsgExpr::union(a.clone(), a.clone())).unwrap(), a);
    }

    #[test]
    fn recovered_actions_replay() {
        let d = micro();
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let s = sample_csg_episode(&d, 3, &mut rng);
            assert_eq!(s.actions.len(), 2 * s.program.leaves() - 1);
            let states = replay(&d, Arc::new(s.spec.clone()), &s.actions).unwrap();
            let last = states.last().unwrap();
            assert_eq!(last.scope.len(), 1);
            assert_eq!(*last.scope[0].expr, s.program);
            assert_eq!(reward(&d, last), 1);
        }
    }
}
