//! Class sets, their display palettes, and per-pixel label grids.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{read_sgrid, write_sgrid, SectionGrid};

/// The two labeling tasks: geologic structures or depositional facies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassSet {
    /// Chaotic = 0, Faults = 1, SaltDome = 2, Other = 3.
    Structures,
    /// HST = 0, LST = 1, TST = 2.
    Facies,
}

impl ClassSet {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            ClassSet::Structures => &["chaotic", "faults", "saltdome", "other"],
            ClassSet::Facies => &["hst", "lst", "tst"],
        }
    }

    pub fn len(self) -> usize {
        self.names().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn palette(self) -> &'static [[u8; 3]] {
        match self {
            ClassSet::Structures => &[[0, 0, 255], [0, 255, 0], [255, 0, 0], [128, 128, 128]],
            ClassSet::Facies => &[[255, 0, 0], [0, 255, 0], [0, 0, 255]],
        }
    }

    pub fn class_index(self, name: &str) -> Result<usize> {
        let key = name.trim().to_ascii_lowercase().replace(['-', '_', ' '], "");
        self.names()
            .iter()
            .position(|&n| n == key)
            .ok_or_else(|| Error::invalid(format!("unknown class {name:?} for the {self} set")))
    }

    /// Class set implied by a class count (4 structures, 3 facies).
    pub fn for_count(n: usize) -> Result<Self> {
        match n {
            4 => Ok(ClassSet::Structures),
            3 => Ok(ClassSet::Facies),
            _ => Err(Error::invalid(format!("no class set has {n} classes"))),
        }
    }
}

impl fmt::Display for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassSet::Structures => "structures",
            ClassSet::Facies => "facies",
        })
    }
}

impl FromStr for ClassSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "structures" | "structure" => Ok(ClassSet::Structures),
            "facies" => Ok(ClassSet::Facies),
            other => Err(Error::invalid(format!("unknown class set {other:?}; expected structures or facies"))),
        }
    }
}

/// Per-pixel class ids aligned with a section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    rows: usize,
    cols: usize,
    labels: Vec<u8>,
}

impl LabelGrid {
    pub fn new(rows: usize, cols: usize, labels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || labels.len() != rows * cols {
            return Err(Error::invalid(format!(
                "label grid {rows}x{cols} cannot hold {} labels",
                labels.len()
            )));
        }
        Ok(LabelGrid { rows, cols, labels })
    }

    pub fn filled(rows: usize, cols: usize, label: u8) -> Result<Self> {
        Self::new(rows, cols, vec![label; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.cols + col]
    }

    pub fn check_classes(&self, n_classes: usize) -> Result<()> {
        match self.labels.iter().find(|&&l| l as usize >= n_classes) {
            Some(l) => Err(Error::invalid(format!("label {l} outside {n_classes} classes"))),
            None => Ok(()),
        }
    }

    pub fn to_grid(&self) -> SectionGrid {
        SectionGrid::new(self.rows, self.cols, self.labels.iter().map(|&l| l as f64).collect())
            .expect("shape checked at construction")
    }

    /// Accepts grids whose values are small non-negative integers.
    pub fn from_grid(grid: &SectionGrid) -> Result<Self> {
        let labels = grid
            .values()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v <= u8::MAX as f64 && v.fract() == 0.0 {
                    Ok(v as u8)
                } else {
                    Err(Error::invalid(format!("{v} is not a class id")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.rows(), grid.cols(), labels)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let grid = read_sgrid(path)?;
        Self::from_grid(&grid).map_err(|e| Error::format("label SGRID", path, e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_sgrid(path, &self.to_grid())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_lookup() {
        assert_eq!(ClassSet::Structures.class_index("Salt Dome").unwrap(), 2);
        assert_eq!(ClassSet::Structures.class_index("salt_dome").unwrap(), 2);
        assert_eq!(ClassSet::Facies.class_index("TST").unwrap(), 2);
        assert!(ClassSet::Facies.class_index("faults").is_err());
        assert_eq!("facies".parse::<ClassSet>().unwrap(), ClassSet::Facies);
        assert_eq!(ClassSet::for_count(4).unwrap(), ClassSet::Structures);
        assert!(ClassSet::for_count(5).is_err());
    }

    #[test]
    fn palettes_are_injective() {
        for set in [ClassSet::Structures, ClassSet::Facies] {
            let p = set.palette();
            assert_eq!(p.len(), set.len());
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    assert_ne!(p[i], p[j]);
                }
            }
        }
    }

    #[test]
    fn grid_conversion_rejects_fractions() {
        let g = SectionGrid::new(1, 2, vec![1.0, 2.5]).unwrap();
        assert!(LabelGrid::from_grid(&g).is_err());
        let g = SectionGrid::new(1, 2, vec![1.0, 3.0]).unwrap();
        assert_eq!(LabelGrid::from_grid(&g).unwrap().labels(), &[1, 3]);
    }
}
