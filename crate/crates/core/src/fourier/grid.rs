use std::io::{Read, Write};
use std::path::Path;

use super::SearchDomain;
use crate::error::{check_dim, usage, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Cell-centered scalar field over a [`SearchDomain`].
///
/// Used for densities (terrain distribution, expected information density)
/// and for raw fields such as reconstructed trajectory statistics. Cells are
/// stored row-major with the last dimension varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    domain: SearchDomain,
    cells: Vec<usize>,
    values: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(domain: SearchDomain, cells: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        check_dim("grid shape", domain.nu(), cells.len())?;
        if cells.iter().any(|&c| c == 0) {
            return usage("grid needs at least one cell per dimension");
        }
        check_dim("grid values", cells.iter().product(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return usage("grid values must be finite");
        }
        Ok(Self {
            domain,
            cells,
            values,
        })
    }

    /// Evaluates `f` at every cell center.
    pub fn from_fn(
        domain: SearchDomain,
        cells: Vec<usize>,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        check_dim("grid shape", domain.nu(), cells.len())?;
        let n: usize = cells.iter().product();
        let mut grid = Self {
            domain,
            cells,
            values: vec![0.0; n],
        };
        let mut center = vec![0.0; grid.domain.nu()];
        for i in 0..n {
            grid.cell_center_into(i, &mut center);
            grid.values[i] = f(&center);
        }
        if grid.values.iter().any(|v| !v.is_finite()) {
            return usage("grid values must be finite");
        }
        Ok(grid)
    }

    pub fn uniform(domain: SearchDomain, cells: Vec<usize>) -> Result<Self> {
        let v = 1.0 / domain.volume();
        Self::from_fn(domain, cells, |_| v)
    }

    pub fn domain(&self) -> &SearchDomain {
        &self.domain
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_size(&self, d: usize) -> f64 {
        self.domain.bounds()[d] / self.cells[d] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.domain.nu()).map(|d| self.cell_size(d)).product()
    }

    pub fn cell_center_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for d in (0..self.cells.len()).rev() {
            let i = rem % self.cells[d];
            rem /= self.cells[d];
            out[d] = (i as f64 + 0.5) * self.cell_size(d);
        }
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.nu()];
        self.cell_center_into(flat, &mut out);
        out
    }

    /// Flat index of the cell containing `s` (clamped to the domain).
    pub fn cell_of(&self, s: &[f64]) -> usize {
        let mut flat = 0;
        for d in 0..self.cells.len() {
            let i = (s[d] / self.cell_size(d)).floor();
            let i = i.clamp(0.0, (self.cells[d] - 1) as f64) as usize;
            flat = flat * self.cells[d] + i;
        }
        flat
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn is_normalized(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0) && (self.mass() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Scales to unit mass. An all-zero grid becomes the uniform density.
    pub fn normalize(&mut self) -> Result<()> {
        if self.values.iter().any(|v| *v < 0.0) {
            return usage("cannot normalize a grid with negative values");
        }
        let mass = self.mass();
        if mass <= 0.0 {
            let v = 1.0 / self.domain.volume();
            self.values.iter_mut().for_each(|x| *x = v);
        } else {
            self.values.iter_mut().for_each(|x| *x /= mass);
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    /// Character plot of a 2-D grid, `y` up, shaded from min to max.
    pub fn to_ascii(&self) -> Option<String> {
        const SHADES: &[u8] = b" .:-=+*#%@";
        let [nx, ny] = self.cells[..] else { return None };
        let max = self.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.values.iter().cloned().fold(f64::MAX, f64::min);
        let mut out = String::with_capacity((nx + 1) * ny);
        for j in (0..ny).rev() {
            for i in 0..nx {
                let v = if max > min { (self.values[i * ny + j] - min) / (max - min) } else { 0.0 };
                out.push(SHADES[(v * 9.0).round() as usize] as char);
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Binary layout: `u32 nu`, `nu x u32` cells, `nu x f64` bounds, then the
    /// row-major `f64` values; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nu = self.domain.nu();
        let mut out = Vec::with_capacity(4 + nu * 12 + self.values.len() * 8);
        out.extend_from_slice(&(nu as u32).to_le_bytes());
        for &c in &self.cells {
            out.extend_from_slice(&(c as u32).to_le_bytes());
        }
        for &l in self.domain.bounds() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let nu = cur.u32()? as usize;
        if nu == 0 || nu > 16 {
            return Err(Error::Wire(format!("implausible grid dimension {nu}")));
        }
        let cells = (0..nu).map(|_| cur.u32().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
        let bounds = (0..nu).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let n: usize = cells.iter().product();
        let values = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Wire("trailing bytes after grid values".into()));
        }
        Self::new(SearchDomain::new(bounds)?, cells, values)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::Wire("truncated grid file".into()));
        }
        let out = self.bytes[self.pos..end].try_into().unwrap();
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_plot_puts_y_up() {
        let g = SpatialGrid::from_fn(SearchDomain::unit(2), vec![3, 2], |s| if s[1] > 0.5 && s[0] < 0.3 { 1.0 } else { 0.0 })
            .unwrap();
        assert_eq!(g.to_ascii().unwrap(), "@  \n   \n");
        assert!(SpatialGrid::uniform(SearchDomain::unit(1), vec![4]).unwrap().to_ascii().is_none());
    }

    #[test]
    fn zero_grid_normalizes_to_uniform() {
        let dom = SearchDomain::new(vec![2.0, 1.0]).unwrap();
        let mut g = SpatialGrid::new(dom, vec![4, 3], vec![0.0; 12]).unwrap();
        g.normalize().unwrap();
        assert!(g.is_normalized());
        assert!(g.values().iter().all(|v| (*v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn negative_values_cannot_be_normalized() {
        let dom = SearchDomain::unit(1);
        let mut g = SpatialGrid::new(dom, vec![2], vec![1.0, -1.0]).unwrap();
        assert!(g.normalize().is_err());
    }

    #[test]
    fn cell_lookup_round_trip() {
        let dom = SearchDomain::new(vec![1.0, 3.0]).unwrap();
        let g = SpatialGrid::uniform(dom, vec![5, 7]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.cell_of(&g.cell_center(i)), i);
        }
    }

    #[test]
    fn file_round_trip() {
        let dom = SearchDomain::new(vec![1.0, 2.0]).unwrap();
        let g = SpatialGrid::from_fn(dom, vec![3, 4], |s| s[0] + 10.0 * s[1]).unwrap();
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), 4 + 2 * 4 + 2 * 8 + 12 * 8);
        assert_eq!(SpatialGrid::from_bytes(&bytes).unwrap(), g);
        assert!(SpatialGrid::from_bytes(&bytes[..bytes.len() - 2]).is_err());
    }
}
