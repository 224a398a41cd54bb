use std::fmt::Write as _;

use super::CsgError;

/// Dense occupancy grid (2D canvas or 3D voxel array), row-major with the
/// first axis fastest: index = x + R·(y + R·z).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitGrid {
    dims: Vec<usize>,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitGrid({:?}, {} set)", self.dims, self.count_ones())
    }
}

impl BitGrid {
    pub fn new(dims: &[usize]) -> Self {
        let len: usize = dims.iter().product();
        BitGrid {
            dims: dims.to_vec(),
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn square(resolution: usize) -> Self {
        Self::new(&[resolution, resolution])
    }

    pub fn cube(resolution: usize) -> Self {
        Self::new(&[resolution, resolution, resolution])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        let mask = 1u64 << (index % 64);
        if value {
            self.words[index / 64] |= mask;
        } else {
            self.words[index / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    fn check_dims(&self, other: &BitGrid) -> Result<(), CsgError> {
        if self.dims != other.dims {
            return Err(CsgError::DimensionMismatch {
                left: self.dims.clone(),
                right: other.dims.clone(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &BitGrid, f: impl Fn(u64, u64) -> u64) -> Result<BitGrid, CsgError> {
        self.check_dims(other)?;
        Ok(BitGrid {
            dims: self.dims.clone(),
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &BitGrid) -> Result<BitGrid, CsgError> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BitGrid) -> Result<BitGrid, CsgError> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &BitGrid) -> Result<BitGrid, CsgError> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> BitGrid {
        let mut out = BitGrid {
            dims: self.dims.clone(),
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset(&self, other: &BitGrid) -> bool {
        self.dims == other.dims && self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0)
    }

    fn clear_tail(&mut self) {
        let len = self.len();
        if len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (len % 64)) - 1;
            }
        }
    }

    /// Occupancy bits as 0.0/1.0, in index order.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    /// Portable grey-map (P2) text; occupied pixels are 255. Only 2D grids.
    pub fn to_pgm(&self) -> Result<String, CsgError> {
        let [w, h] = self.dims[..] else {
            return Err(CsgError::InvalidDimension("PGM export needs a 2D canvas".into()));
        };
        let mut out = format!("P2\n{w} {h}\n255\n");
        for y in 0..h {
            let row: Vec<&str> = (0..w)
                .map(|x| if self.get(y * w + x) { "255" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    /// Run-length text: `<d1>x<d2>[x<d3>]` followed by alternating run
    /// lengths, starting with a (possibly zero) run of empty cells.
    pub fn to_rle(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut out = dims.join("x");
        let mut current = false;
        let mut run = 0usize;
        for i in 0..self.len() {
            let bit = self.get(i);
            if bit != current {
                write!(out, " {run}").unwrap();
                current = bit;
                run = 0;
            }
            run += 1;
        }
        write!(out, " {run}").unwrap();
        out
    }

    pub fn from_rle(text: &str) -> Result<BitGrid, CsgError> {
        let mut parts = text.split_whitespace();
        let header = parts.next().ok_or_else(|| CsgError::Parse("empty grid text".into()))?;
        let dims = header
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|e| CsgError::Parse(format!("bad dimension {d:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if !(2..=3).contains(&dims.len()) {
            return Err(CsgError::Parse(format!("expected 2 or 3 dimensions, got {}", dims.len())));
        }
        let mut grid = BitGrid::new(&dims);
        let mut pos = 0usize;
        let mut value = false;
        for run in parts {
            let run: usize = run.parse().map_err(|e| CsgError::Parse(format!("bad run {run:?}: {e}")))?;
            if pos + run > grid.len() {
                return Err(CsgError::Parse("runs exceed grid size".into()));
            }
            if value {
                for i in pos..pos + run {
                    grid.set(i, true);
                }
            }
            pos += run;
            value = !value;
        }
        if pos != grid.len() {
            return Err(CsgError::Parse(format!("runs cover {pos} of {} cells", grid.len())));
        }
        Ok(grid)
    }
}

/// Intersection over union; two empty grids score 1.
pub fn iou(a: &BitGrid, b: &BitGrid) -> Result<f64, CsgError> {
    a.check_dims(b)?;
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones() as u64;
        union += (x | y).count_ones() as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_grid() -> BitGrid {
        let mut g = BitGrid::square(8);
        for i in 0..32 {
            g.set(i, true);
        }
        g
    }

    #[test]
    fn iou_identity_disjoint_and_half() {
        let x = half_grid();
        assert_eq!(iou(&x, &x).unwrap(), 1.0);
        assert_eq!(iou(&x, &x.complement()).unwrap(), 0.0);
        let full = BitGrid::square(8).complement();
        assert_eq!(full.count_ones(), 64);
        assert_eq!(iou(&x, &full).unwrap(), 0.5);
        assert_eq!(iou(&BitGrid::square(4), &BitGrid::square(4)).unwrap(), 1.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        assert!(matches!(
            iou(&BitGrid::square(4), &BitGrid::square(8)),
            Err(CsgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn complement_keeps_padding_clear() {
        let g = BitGrid::cube(3).complement();
        assert_eq!(g.count_ones(), 27);
    }

    #[test]
    fn rle_round_trip() {
        let mut g = BitGrid::cube(4);
        for i in [0, 1, 2, 17, 40, 63] {
            g.set(i, true);
        }
        let text = g.to_rle();
        assert!(text.starts_with("4x4x4 0 3 "));
        assert_eq!(BitGrid::from_rle(&text).unwrap(), g);
        assert!(BitGrid::from_rle("4x4 3").is_err());
    }

    #[test]
    fn pgm_header_and_rows() {
        let pgm = half_grid().to_pgm().unwrap();
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(&lines[..3], &["P2", "8 8", "255"]);
        assert_eq!(lines.len(), 3 + 8);
        assert!(BitGrid::cube(2).to_pgm().is_err());
    }
}
