use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spike-in concentrations assigned to genes across mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeInDesign {
    /// Concentration levels in picomolar; 0 means not spiked.
    pub levels: Vec<f64>,
    /// `assignment[gene][mixture]` is an index into `levels`.
    pub assignment: Vec<Vec<usize>>,
    pub replicates: usize,
}

impl SpikeInDesign {
    pub fn new(levels: Vec<f64>, assignment: Vec<Vec<usize>>, replicates: usize) -> Result<Self> {
        let n_mix = assignment.first().map_or(0, Vec::len);
        if levels.is_empty() || n_mix == 0 || replicates == 0 {
            return Err(Error::InvalidParameter(
                "spike-in design needs levels, mixtures and replicates".into(),
            ));
        }
        if assignment
            .iter()
            .any(|row| row.len() != n_mix || row.iter().any(|&l| l >= levels.len()))
        {
            return Err(Error::InvalidParameter("malformed spike-in assignment".into()));
        }
        if levels.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("concentrations must be nonnegative".into()));
        }
        Ok(SpikeInDesign {
            levels,
            assignment,
            replicates,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_mixtures(&self) -> usize {
        self.assignment[0].len()
    }

    pub fn n_arrays(&self) -> usize {
        self.n_mixtures() * self.replicates
    }

    pub fn concentration(&self, gene: usize, mixture: usize) -> f64 {
        self.levels[self.assignment[gene][mixture]]
    }

    /// True when every gene sees every level exactly once.
    pub fn is_latin_square(&self) -> bool {
        self.n_mixtures() == self.levels.len()
            && self.assignment.iter().all(|row| {
                let mut seen = vec![false; self.levels.len()];
                row.iter().all(|&l| !std::mem::replace(&mut seen[l], true))
            })
    }

    /// Keeps only the listed mixtures, in order.
    pub fn restrict_mixtures(&self, mixtures: &[usize]) -> Result<Self> {
        if mixtures.iter().any(|&m| m >= self.n_mixtures()) {
            return Err(Error::InvalidParameter("mixture index out of range".into()));
        }
        let assignment = self
            .assignment
            .iter()
            .map(|row| mixtures.iter().map(|&m| row[m]).collect())
            .collect();
        SpikeInDesign::new(self.levels.clone(), assignment, self.replicates)
    }
}

/// 42 genes, 14 mixtures, concentrations 0 and 0.125 to 512 pM by
/// doublings, three replicates per mixture (42 arrays). Gene `g` receives
/// level `(g + m) mod 14` in mixture `m`, so consecutive mixtures double the
/// concentration of all but six genes.
pub fn default_latin_square() -> SpikeInDesign {
    let mut levels = vec![0.0];
    levels.extend((0..13).map(|k| 0.125 * 2f64.powi(k)));
    let n_levels = levels.len();
    let assignment = (0..42)
        .map(|g| (0..n_levels).map(|m| (g + m) % n_levels).collect())
        .collect();
    SpikeInDesign::new(levels, assignment, 3).expect("static design is valid")
}
