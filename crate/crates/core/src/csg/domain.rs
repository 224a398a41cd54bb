use std::sync::Arc;

use super::expr::{Angle, CsgExpr, Dim};
use super::grid::{iou, BitGrid};
use super::render::{render, render_primitive};
use super::CsgError;
use crate::mdp::{Action, Domain, Grammar, GridView, MdpError, Production, ReplView};

/// Grammar and REPL configuration for one CSG language instance.
///
/// Parameter value lists must be subsets of the dimension's lattice; the
/// default constructors use the whole lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct CsgConfig {
    pub dim: Dim,
    pub resolution: usize,
    pub max_objects: usize,
    pub coords: Vec<u8>,
    pub radii: Vec<u8>,
    /// Quadrilateral widths and heights (2D only).
    pub sizes: Vec<u8>,
    pub angles: Vec<Angle>,
}

impl CsgConfig {
    pub fn full_2d() -> Self {
        CsgConfig {
            dim: Dim::Two,
            resolution: 64,
            max_objects: 13,
            coords: Dim::Two.lattice(),
            radii: Dim::Two.lattice(),
            sizes: Dim::Two.lattice(),
            angles: vec![Angle::Deg0, Angle::Deg45],
        }
    }

    pub fn full_3d() -> Self {
        CsgConfig {
            dim: Dim::Three,
            resolution: 32,
            max_objects: 13,
            coords: Dim::Three.lattice(),
            radii: Dim::Three.lattice(),
            sizes: Vec::new(),
            angles: Vec::new(),
        }
    }

    /// Small 8×8 two-object world used for desk-scale training and tests.
    pub fn micro_2d() -> Self {
        CsgConfig {
            dim: Dim::Two,
            resolution: 8,
            max_objects: 2,
            coords: vec![8, 16, 24],
            radii: vec![4, 8],
            sizes: vec![8, 16],
            angles: vec![Angle::Deg0, Angle::Deg45],
        }
    }

    /// Small 8³ voxel world.
    pub fn micro_3d() -> Self {
        CsgConfig {
            dim: Dim::Three,
            resolution: 8,
            max_objects: 2,
            coords: vec![4, 16, 28],
            radii: vec![8],
            sizes: Vec::new(),
            angles: Vec::new(),
        }
    }

    pub fn with_max_objects(mut self, max_objects: usize) -> Self {
        self.max_objects = max_objects;
        self
    }

    fn validate(&self) -> Result<(), CsgError> {
        let lists: [(&str, &[u8]); 3] = [("coordinate", &self.coords), ("radius", &self.radii), ("size", &self.sizes)];
        for (slot, values) in lists {
            if let Some(&value) = values.iter().find(|&&v| !self.dim.on_lattice(v)) {
                return Err(CsgError::OffLattice { slot: slot.into(), value });
            }
        }
        if self.resolution == 0 || self.max_objects == 0 {
            return Err(CsgError::InvalidDimension("resolution and max_objects must be positive".into()));
        }
        Ok(())
    }
}

/// One scope entry: a complete tree together with its rendered canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct CsgEntry {
    pub expr: Arc<CsgExpr>,
    pub canvas: Arc<BitGrid>,
    /// The action that created this entry.
    pub origin: Action,
}

pub type CsgScope = Vec<Arc<CsgEntry>>;

/// CSG language bound to a configuration.
#[derive(Clone, Debug)]
pub struct CsgDomain {
    config: CsgConfig,
    grammar: Grammar,
    union_id: u16,
    difference_id: u16,
}

impl CsgDomain {
    pub fn new(config: CsgConfig) -> Result<Self, CsgError> {
        config.validate()?;
        let (c, r, s, a) = (config.coords.len(), config.radii.len(), config.sizes.len(), config.angles.len());
        let mut productions = match config.dim {
            Dim::Two => vec![
                Production::new("circle", &[("radius", r), ("x", c), ("y", c)], 0),
                Production::new("quadrilateral", &[("x", c), ("y", c), ("w", s), ("h", s), ("angle", a)], 0),
            ],
            Dim::Three => vec![
                Production::new("sphere", &[("radius", r), ("x", c), ("y", c), ("z", c)], 0),
                Production::new(
                    "cube",
                    &[("x0", c), ("y0", c), ("z0", c), ("x1", c), ("y1", c), ("z1", c)],
                    0,
                ),
                Production::new(
                    "cylinder",
                    &[("x0", c), ("y0", c), ("z0", c), ("x1", c), ("y1", c), ("z1", c), ("radius", r)],
                    0,
                ),
            ],
        };
        let union_id = productions.len() as u16;
        productions.push(Production::new("union", &[], 2));
        productions.push(Production::new("difference", &[], 2));
        let name = format!(
            "csg{}d/res{}/coords{:?}/radii{:?}/sizes{:?}/angles{:?}",
            config.dim.axes(),
            config.resolution,
            config.coords,
            config.radii,
            config.sizes,
            config.angles.iter().map(|a| a.degrees()).collect::<Vec<_>>()
        );
        Ok(CsgDomain {
            config,
            grammar: Grammar { name, productions },
            union_id,
            difference_id: union_id + 1,
        })
    }

    pub fn config(&self) -> &CsgConfig {
        &self.config
    }

    pub fn union_id(&self) -> u16 {
        self.union_id
    }

    pub fn difference_id(&self) -> u16 {
        self.difference_id
    }

    pub fn render(&self, expr: &CsgExpr) -> Result<BitGrid, CsgError> {
        if expr.dim()? != self.config.dim {
            return Err(CsgError::InvalidDimension("tree dimension differs from the domain".into()));
        }
        render(expr, self.config.resolution)
    }

    fn index_of(values: &[u8], value: u8, slot: &str) -> Result<u16, CsgError> {
        values
            .iter()
            .position(|&v| v == value)
            .map(|i| i as u16)
            .ok_or(CsgError::OffLattice { slot: slot.into(), value })
    }

    /// The terminal action that places `expr` (a primitive) in scope.
    pub fn primitive_action(&self, expr: &CsgExpr) -> Result<Action, CsgError> {
        let cfg = &self.config;
        let c = |v: u8| Self::index_of(&cfg.coords, v, "coordinate");
        let r = |v: u8| Self::index_of(&cfg.radii, v, "radius");
        let (production, params): (u16, Vec<u16>) = match (expr, cfg.dim) {
            (&CsgExpr::Circle { r: rad, x, y }, Dim::Two) => (0, vec![r(rad)?, c(x)?, c(y)?]),
            (&CsgExpr::Quadrilateral { x, y, w, h, angle }, Dim::Two) => {
                let s = |v: u8| Self::index_of(&cfg.sizes, v, "size");
                let a = cfg
                    .angles
                    .iter()
                    .position(|&g| g == angle)
                    .ok_or(CsgError::OffLattice { slot: "angle".into(), value: angle.degrees() })?;
                (1, vec![c(x)?, c(y)?, s(w)?, s(h)?, a as u16])
            }
            (&CsgExpr::Sphere { r: rad, x, y, z }, Dim::Three) => (0, vec![r(rad)?, c(x)?, c(y)?, c(z)?]),
            (&CsgExpr::Cube { x0, y0, z0, x1, y1, z1 }, Dim::Three) => {
                (1, vec![c(x0)?, c(y0)?, c(z0)?, c(x1)?, c(y1)?, c(z1)?])
            }
            (&CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, r: rad }, Dim::Three) => {
                (2, vec![c(x0)?, c(y0)?, c(z0)?, c(x1)?, c(y1)?, c(z1)?, r(rad)?])
            }
            (CsgExpr::Union(..) | CsgExpr::Difference(..), _) => {
                return Err(CsgError::InvalidDimension("combinators are not primitives".into()))
            }
            _ => return Err(CsgError::InvalidDimension("primitive dimension differs from the domain".into())),
        };
        Ok(Action::terminal(production, &params))
    }

    /// The primitive placed by a terminal action.
    pub fn primitive_of(&self, action: &Action) -> Option<CsgExpr> {
        let cfg = &self.config;
        let p = &action.params;
        let c = |i: usize| cfg.coords[p[i] as usize];
        let r = |i: usize| cfg.radii[p[i] as usize];
        Some(match (cfg.dim, action.production) {
            (Dim::Two, 0) => CsgExpr::Circle { r: r(0), x: c(1), y: c(2) },
            (Dim::Two, 1) => CsgExpr::Quadrilateral {
                x: c(0),
                y: c(1),
                w: cfg.sizes[p[2] as usize],
                h: cfg.sizes[p[3] as usize],
                angle: cfg.angles[p[4] as usize],
            },
            (Dim::Three, 0) => CsgExpr::Sphere { r: r(0), x: c(1), y: c(2), z: c(3) },
            (Dim::Three, 1) => CsgExpr::Cube { x0: c(0), y0: c(1), z0: c(2), x1: c(3), y1: c(4), z1: c(5) },
            (Dim::Three, 2) => CsgExpr::Cylinder {
                x0: c(0),
                y0: c(1),
                z0: c(2),
                x1: c(3),
                y1: c(4),
                z1: c(5),
                r: r(6),
            },
            _ => return None,
        })
    }

    /// Index of the scope entry with the highest IoU against `spec`.
    pub fn best_entry(&self, spec: &BitGrid, scope: &CsgScope) -> Option<(usize, f64)> {
        scope
            .iter()
            .enumerate()
            .map(|(i, e)| (i, iou(&e.canvas, spec).unwrap_or(0.0)))
            .fold(None, |best: Option<(usize, f64)>, (i, q)| match best {
                Some((_, bq)) if bq >= q => best,
                _ => Some((i, q)),
            })
    }
}

impl Domain for CsgDomain {
    type Spec = BitGrid;
    type Scope = CsgScope;

    fn name(&self) -> &str {
        match self.config.dim {
            Dim::Two => "csg2d",
            Dim::Three => "csg3d",
        }
    }

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn horizon(&self) -> usize {
        2 * self.config.max_objects - 1
    }

    fn empty_scope(&self, _spec: &BitGrid) -> CsgScope {
        Vec::new()
    }

    fn scope_len(&self, scope: &CsgScope) -> usize {
        scope.len()
    }

    fn production_legal(&self, scope: &CsgScope, production: u16) -> bool {
        (production as usize) < self.grammar.productions.len()
            && self.grammar.productions[production as usize].arity <= scope.len()
    }

    fn transition(&self, _spec: &BitGrid, scope: &CsgScope, action: &Action) -> Result<CsgScope, MdpError> {
        if action.production == self.union_id || action.production == self.difference_id {
            let (i, j) = (action.operands[0] as usize, action.operands[1] as usize);
            let (a, b) = (&scope[i], &scope[j]);
            let (expr, canvas) = if action.production == self.union_id {
                (
                    CsgExpr::Union(Arc::clone(&a.expr), Arc::clone(&b.expr)),
                    a.canvas.union(&b.canvas),
                )
            } else {
                (
                    CsgExpr::Difference(Arc::clone(&a.expr), Arc::clone(&b.expr)),
                    a.canvas.difference(&b.canvas),
                )
            };
            let canvas = canvas.map_err(|e| MdpError::Parse(e.to_string()))?;
            let mut next: CsgScope = scope
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i && *k != j)
                .map(|(_, e)| Arc::clone(e))
                .collect();
            next.push(Arc::new(CsgEntry {
                expr: Arc::new(expr),
                canvas: Arc::new(canvas),
                origin: action.clone(),
            }));
            return Ok(next);
        }
        let expr = self
            .primitive_of(action)
            .ok_or(MdpError::UnknownProduction(action.production))?;
        let canvas = render_primitive(&expr, self.config.resolution);
        let mut next = scope.clone();
        next.push(Arc::new(CsgEntry {
            expr: Arc::new(expr),
            canvas: Arc::new(canvas),
            origin: action.clone(),
        }));
        Ok(next)
    }

    fn is_dead(&self, _spec: &BitGrid, _scope: &CsgScope) -> bool {
        false
    }

    fn satisfies(&self, spec: &BitGrid, scope: &CsgScope) -> bool {
        scope.iter().any(|e| *e.canvas == *spec)
    }

    fn quality(&self, spec: &BitGrid, scope: &CsgScope) -> f64 {
        self.best_entry(spec, scope).map_or(0.0, |(_, q)| q)
    }

    fn max_quality(&self) -> f64 {
        1.0
    }

    fn view(&self, spec: &Arc<BitGrid>, scope: &CsgScope, _previous: Option<&Action>) -> ReplView {
        ReplView::Grid(GridView {
            spec: Arc::clone(spec),
            canvases: scope.iter().map(|e| Arc::clone(&e.canvas)).collect(),
            origins: scope.iter().map(|e| e.origin.clone()).collect(),
        })
    }

    fn format_action(&self, action: &Action) -> String {
        if action.production == self.union_id || action.production == self.difference_id {
            let name = &self.grammar.productions[action.production as usize].name;
            let ops: Vec<String> = action.operands.iter().map(|o| o.to_string()).collect();
            return format!("{name}({})", ops.join(", "));
        }
        match self.primitive_of(action) {
            Some(expr) => expr.to_string(),
            None => format!("<production {}>", action.production),
        }
    }

    fn parse_action(&self, text: &str) -> Result<Action, MdpError> {
        let text = text.trim();
        for (name, id) in [("union", self.union_id), ("difference", self.difference_id)] {
            if let Some(rest) = text.strip_prefix(name).and_then(|r| r.strip_prefix('(')) {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| MdpError::Parse(format!("unclosed combinator {text:?}")))?;
                let operands = inner
                    .split(',')
                    .map(|s| s.trim().parse::<u16>().map_err(|e| MdpError::Parse(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(Action::combinator(id, &operands));
            }
        }
        let expr: CsgExpr = text.parse().map_err(|e: CsgError| MdpError::Parse(e.to_string()))?;
        self.primitive_action(&expr).map_err(|e| MdpError::Parse(e.to_string()))
    }

    fn program_text(&self, spec: &BitGrid, scope: &CsgScope) -> String {
        self.best_entry(spec, scope)
            .map(|(i, _)| scope[i].expr.to_string())
            .unwrap_or_default()
    }

    fn encode_spec(&self, spec: &BitGrid) -> String {
        spec.to_rle()
    }

    fn decode_spec(&self, text: &str) -> Result<BitGrid, MdpError> {
        let grid = BitGrid::from_rle(text).map_err(|e| MdpError::Parse(e.to_string()))?;
        let expected = vec![self.config.resolution; self.config.dim.axes()];
        if grid.dims() != expected.as_slice() {
            return Err(MdpError::Parse(format!("spec dims {:?}, expected {expected:?}", grid.dims())));
        }
        Ok(grid)
    }
}

/// Render every scope entry, in scope order.
pub fn csg_repl(pp: &[CsgExpr], resolution: usize) -> Result<Vec<BitGrid>, CsgError> {
    if let Some(first) = pp.first() {
        let dim = first.dim()?;
        if pp.iter().any(|e| e.dim().ok() != Some(dim)) {
            return Err(CsgError::InvalidDimension("scope mixes 2D and 3D trees".into()));
        }
    }
    pp.iter().map(|e| render(e, resolution)).collect()
}

/// True iff some program renders exactly to `spec`.
pub fn satisfies(pp: &[CsgExpr], spec: &BitGrid) -> bool {
    let resolution = spec.dims()[0];
    pp.iter()
        .any(|e| render(e, resolution).map(|g| g == *spec).unwrap_or(false))
}

/// Exact number of legal actions in the full-lattice grammar for a scope of
/// `scope_size` entries: every terminal binding plus ordered operand pairs
/// for union and difference.
pub fn action_space_size(dim: Dim, scope_size: usize) -> u64 {
    let n = dim.lattice().len() as u64;
    let terminals = match dim {
        // circle: radius, x, y; quadrilateral: x, y, w, h, two rotations
        Dim::Two => n.pow(3) + n.pow(4) * 2,
        // sphere: 4 params; cube: 6; cylinder: 7
        Dim::Three => n.pow(4) + n.pow(6) + n.pow(7),
    };
    let s = scope_size as u64;
    terminals + 2 * s * s.saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{apply_action, count_legal_actions, initial_state, legal_actions, reward};

    fn micro() -> CsgDomain {
        CsgDomain::new(CsgConfig::micro_2d()).unwrap()
    }

    #[test]
    fn grammar_shapes() {
        let d = CsgDomain::new(CsgConfig::full_2d()).unwrap();
        let names: Vec<&str> = d.grammar().productions.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["circle", "quadrilateral", "union", "difference"]);
        assert_eq!(d.horizon(), 25);
        assert_ne!(d.grammar().fingerprint(), micro().grammar().fingerprint());
    }

    #[test]
    fn off_lattice_config_rejected() {
        let mut cfg = CsgConfig::micro_2d();
        cfg.coords.push(5);
        assert!(matches!(CsgDomain::new(cfg), Err(CsgError::OffLattice { .. })));
    }

    #[test]
    fn action_text_round_trip() {
        let d = micro();
        let s = initial_state(&d, Arc::new(BitGrid::square(8)));
        let s = apply_action(&d, &s, &Action::terminal(0, &[0, 0, 0])).unwrap();
        let s = apply_action(&d, &s, &Action::terminal(1, &[1, 2, 0, 1, 1])).unwrap();
        for a in legal_actions(&d, &s) {
            let text = d.format_action(&a);
            assert_eq!(d.parse_action(&text).unwrap(), a, "{text}");
        }
    }

    #[test]
    fn full_lattice_counts() {
        let full2 = CsgDomain::new(CsgConfig::full_2d()).unwrap();
        let s = initial_state(&full2, Arc::new(BitGrid::square(64)));
        assert_eq!(count_legal_actions(&full2, &s), action_space_size(Dim::Two, 0));
        assert_eq!(action_space_size(Dim::Two, 0), 4096 + 131072);
        assert_eq!(action_space_size(Dim::Two, 3), action_space_size(Dim::Two, 0) + 12);
        assert_eq!(action_space_size(Dim::Three, 0), 4096 + 262_144 + 2_097_152);
    }

    #[test]
    fn reward_requires_exact_match() {
        let d = micro();
        let target = CsgExpr::Circle { r: 8, x: 16, y: 16 };
        let spec = Arc::new(d.render(&target).unwrap());
        let s0 = initial_state(&d, Arc::clone(&spec));
        assert_eq!(reward(&d, &s0), 0);
        let hit = apply_action(&d, &s0, &d.primitive_action(&target).unwrap()).unwrap();
        assert_eq!(reward(&d, &hit), 1);
        let near = CsgExpr::Circle { r: 8, x: 16, y: 24 };
        let miss = apply_action(&d, &s0, &d.primitive_action(&near).unwrap()).unwrap();
        assert_eq!(reward(&d, &miss), 0);
        assert!(d.quality(&spec, &miss.scope) < 1.0);
    }

    #[test]
    fn repl_maps_render_over_scope() {
        let a = CsgExpr::Circle { r: 4, x: 8, y: 8 };
        let b = CsgExpr::Quadrilateral { x: 20, y: 20, w: 6, h: 8, angle: Angle::Deg0 };
        assert!(csg_repl(&[], 16).unwrap().is_empty());
        let out = csg_repl(&[a.clone(), b.clone()], 16).unwrap();
        assert_eq!(out, vec![render(&a, 16).unwrap(), render(&b, 16).unwrap()]);
        let spec = render(&b, 16).unwrap();
        assert!(satisfies(&[a.clone(), b], &spec));
        assert!(!satisfies(&[], &spec));
        assert!(!satisfies(&[a], &spec));
    }
}
