use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::CsgError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    /// Spacing of the coordinate lattice.
    pub fn lattice_step(self) -> u8 {
        match self {
            Dim::Two => 2,
            Dim::Three => 4,
        }
    }

    /// Every value on the coordinate lattice, ascending.
    pub fn lattice(self) -> Vec<u8> {
        (0..32).step_by(self.lattice_step() as usize).collect()
    }

    pub fn on_lattice(self, value: u8) -> bool {
        value < 32 && value % self.lattice_step() == 0
    }

    pub fn axes(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

/// Rotation of a quadrilateral; rectangles are rotated in 45° increments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Angle {
    Deg0,
    Deg45,
}

impl Angle {
    pub fn degrees(self) -> u8 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
        }
    }

    pub fn from_degrees(deg: u32) -> Option<Angle> {
        match deg {
            0 => Some(Angle::Deg0),
            45 => Some(Angle::Deg45),
            _ => None,
        }
    }
}

/// Constructive-solid-geometry program. Parameters are lattice values, not indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CsgExpr {
    Union(Arc<CsgExpr>, Arc<CsgExpr>),
    Difference(Arc<CsgExpr>, Arc<CsgExpr>),
    Circle { r: u8, x: u8, y: u8 },
    /// Rectangle centred at (x, y) with full extents w × h, rotated by `angle`.
    Quadrilateral { x: u8, y: u8, w: u8, h: u8, angle: Angle },
    Sphere { r: u8, x: u8, y: u8, z: u8 },
    /// Axis-aligned box between corners (x0, y0, z0) and (x1, y1, z1).
    Cube { x0: u8, y0: u8, z0: u8, x1: u8, y1: u8, z1: u8 },
    /// Closed cylinder with axis from point 0 to point 1.
    Cylinder { x0: u8, y0: u8, z0: u8, x1: u8, y1: u8, z1: u8, r: u8 },
}

impl CsgExpr {
    pub fn union(a: CsgExpr, b: CsgExpr) -> CsgExpr {
        CsgExpr::Union(Arc::new(a), Arc::new(b))
    }

    pub fn difference(a: CsgExpr, b: CsgExpr) -> CsgExpr {
        CsgExpr::Difference(Arc::new(a), Arc::new(b))
    }

    pub fn is_primitive(&self) -> bool {
        !matches!(self, CsgExpr::Union(..) | CsgExpr::Difference(..))
    }

    pub fn children(&self) -> Option<(&Arc<CsgExpr>, &Arc<CsgExpr>)> {
        match self {
            CsgExpr::Union(a, b) | CsgExpr::Difference(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Dimensionality of the tree; `InvalidDimension` when 2D and 3D nodes mix.
    pub fn dim(&self) -> Result<Dim, CsgError> {
        match self {
            CsgExpr::Circle { .. } | CsgExpr::Quadrilateral { .. } => Ok(Dim::Two),
            CsgExpr::Sphere { .. } | CsgExpr::Cube { .. } | CsgExpr::Cylinder { .. } => Ok(Dim::Three),
            CsgExpr::Union(a, b) | CsgExpr::Difference(a, b) => {
                let (da, db) = (a.dim()?, b.dim()?);
                if da != db {
                    return Err(CsgError::InvalidDimension("2D and 3D nodes mixed in one tree".into()));
                }
                Ok(da)
            }
        }
    }

    pub fn leaves(&self) -> usize {
        match self.children() {
            Some((a, b)) => a.leaves() + b.leaves(),
            None => 1,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.children() {
            Some((a, b)) => 1 + a.node_count() + b.node_count(),
            None => 1,
        }
    }

    /// Every parameter lies on its dimension's lattice.
    pub fn on_lattice(&self) -> bool {
        let Ok(dim) = self.dim() else { return false };
        match self {
            CsgExpr::Union(a, b) | CsgExpr::Difference(a, b) => a.on_lattice() && b.on_lattice(),
            CsgExpr::Circle { r, x, y } => [*r, *x, *y].iter().all(|&v| dim.on_lattice(v)),
            CsgExpr::Quadrilateral { x, y, w, h, .. } => {
                [*x, *y, *w, *h].iter().all(|&v| dim.on_lattice(v))
            }
            CsgExpr::Sphere { r, x, y, z } => [*r, *x, *y, *z].iter().all(|&v| dim.on_lattice(v)),
            CsgExpr::Cube { x0, y0, z0, x1, y1, z1 } => {
                [*x0, *y0, *z0, *x1, *y1, *z1].iter().all(|&v| dim.on_lattice(v))
            }
            CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, r } => {
                [*x0, *y0, *z0, *x1, *y1, *z1, *r].iter().all(|&v| dim.on_lattice(v))
            }
        }
    }
}

impl fmt::Display for CsgExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsgExpr::Union(a, b) => write!(f, "({a} + {b})"),
            CsgExpr::Difference(a, b) => write!(f, "({a} - {b})"),
            CsgExpr::Circle { r, x, y } => write!(f, "circle(radius={r}, x={x}, y={y})"),
            CsgExpr::Quadrilateral { x, y, w, h, angle } => write!(
                f,
                "quadrilateral(x={x}, y={y}, w={w}, h={h}, angle={})",
                angle.degrees()
            ),
            CsgExpr::Sphere { r, x, y, z } => write!(f, "sphere(radius={r}, x={x}, y={y}, z={z})"),
            CsgExpr::Cube { x0, y0, z0, x1, y1, z1 } => write!(
                f,
                "cube(x0={x0}, y0={y0}, z0={z0}, x1={x1}, y1={y1}, z1={z1})"
            ),
            CsgExpr::Cylinder { x0, y0, z0, x1, y1, z1, r } => write!(
                f,
                "cylinder(x0={x0}, y0={y0}, z0={z0}, x1={x1}, y1={y1}, z1={z1}, radius={r})"
            ),
        }
    }
}

impl FromStr for CsgExpr {
    type Err = CsgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parser = Parser { src: s.as_bytes(), pos: 0 };
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("trailing input"));
        }
        expr.dim()?;
        Ok(expr)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> CsgError {
        CsgError::Parse(format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), CsgError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {:?}", c as char)))
        }
    }

    // expr := term (('+' | '-') term)*, left-associative
    fn expr(&mut self) -> Result<CsgExpr, CsgError> {
        let mut left = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    left = CsgExpr::union(left, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    left = CsgExpr::difference(left, self.term()?);
                }
                _ => return Ok(left),
            }
        }
    }

    fn term(&mut self) -> Result<CsgExpr, CsgError> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        self.shape()
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<u32, CsgError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.error("expected number"))
    }

    fn shape(&mut self) -> Result<CsgExpr, CsgError> {
        let name = self.ident();
        let keys: &[&str] = match name.as_str() {
            "circle" => &["radius", "x", "y"],
            "quadrilateral" => &["x", "y", "w", "h", "angle"],
            "sphere" => &["radius", "x", "y", "z"],
            "cube" => &["x0", "y0", "z0", "x1", "y1", "z1"],
            "cylinder" => &["x0", "y0", "z0", "x1", "y1", "z1", "radius"],
            _ => return Err(self.error(&format!("unknown shape {name:?}"))),
        };
        self.expect(b'(')?;
        let mut values = Vec::with_capacity(keys.len());
        for (i, key) in keys.iter().enumerate() {
            if i > 0 {
                self.expect(b',')?;
            }
            let got = self.ident();
            if got != *key {
                return Err(self.error(&format!("expected argument {key:?}, found {got:?}")));
            }
            self.expect(b'=')?;
            values.push(self.number()?);
        }
        self.expect(b')')?;
        let byte = |i: usize| -> Result<u8, CsgError> {
            u8::try_from(values[i]).map_err(|_| CsgError::Parse(format!("value {} too large", values[i])))
        };
        let expr = match name.as_str() {
            "circle" => CsgExpr::Circle { r: byte(0)?, x: byte(1)?, y: byte(2)? },
            "quadrilateral" => CsgExpr::Quadrilateral {
                x: byte(0)?,
                y: byte(1)?,
                w: byte(2)?,
                h: byte(3)?,
                angle: Angle::from_degrees(values[4])
                    .ok_or_else(|| CsgError::Parse(format!("angle must be 0 or 45, got {}", values[4])))?,
            },
            "sphere" => CsgExpr::Sphere { r: byte(0)?, x: byte(1)?, y: byte(2)?, z: byte(3)? },
            "cube" => CsgExpr::Cube {
                x0: byte(0)?,
                y0: byte(1)?,
                z0: byte(2)?,
                x1: byte(3)?,
                y1: byte(4)?,
                z1: byte(5)?,
            },
            _ => CsgExpr::Cylinder {
                x0: byte(0)?,
                y0: byte(1)?,
                z0: byte(2)?,
                x1: byte(3)?,
                y1: byte(4)?,
                z1: byte(5)?,
                r: byte(6)?,
            },
        };
        Ok(expr)
    }
}
