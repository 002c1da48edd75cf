use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PM: &str = "PM";
pub const MM: &str = "MM";
pub const RED: &str = "R";
pub const GREEN: &str = "G";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub index: u32,
    /// One sequence per channel, in dataset channel order.
    pub sequences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub gene_id: String,
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub id: String,
    pub condition: u32,
}

/// Intensities indexed by (gene, array, probe, channel).
///
/// Storage is flat, probe-major: all arrays and channels of one probe are
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeLevelDataset {
    genes: Vec<ProbeSet>,
    arrays: Vec<ArrayMeta>,
    channels: Vec<String>,
    probe_offsets: Vec<usize>,
    intensities: Vec<f64>,
}

impl ProbeLevelDataset {
    pub fn new(
        genes: Vec<ProbeSet>,
        arrays: Vec<ArrayMeta>,
        channels: Vec<String>,
        intensities: Vec<f64>,
    ) -> Result<Self> {
        if genes.is_empty() || arrays.is_empty() || channels.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset needs at least one gene, array and channel".into(),
            ));
        }
        let mut probe_offsets = Vec::with_capacity(genes.len() + 1);
        probe_offsets.push(0);
        let mut seq_len = None;
        for g in &genes {
            if g.probes.is_empty() {
                return Err(Error::InvalidDataset(format!("gene {} has no probes", g.gene_id)));
            }
            for p in &g.probes {
                if p.sequences.len() != channels.len() {
                    return Err(Error::InvalidDataset(format!(
                        "gene {} probe {}: {} sequences for {} channels",
                        g.gene_id,
                        p.index,
                        p.sequences.len(),
                        channels.len()
                    )));
                }
                for s in &p.sequences {
                    match seq_len {
                        None => seq_len = Some(s.len()),
                        Some(l) if l != s.len() => {
                            return Err(Error::InvalidDataset(format!(
                                "gene {} probe {}: sequence length {} differs from {}",
                                g.gene_id,
                                p.index,
                                s.len(),
                                l
                            )))
                        }
                        _ => {}
                    }
                }
            }
            probe_offsets.push(probe_offsets.last().unwrap() + g.probes.len());
        }
        let expected = probe_offsets.last().unwrap() * arrays.len() * channels.len();
        if intensities.len() != expected {
            return Err(Error::InvalidDataset(format!(
                "expected {expected} intensities, got {}",
                intensities.len()
            )));
        }
        if let Some(bad) = intensities.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDataset(format!(
                "intensities must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(ProbeLevelDataset {
            genes,
            arrays,
            channels,
            probe_offsets,
            intensities,
        })
    }

    pub fn genes(&self) -> &[ProbeSet] {
        &self.genes
    }

    pub fn arrays(&self) -> &[ArrayMeta] {
        &self.arrays
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_arrays(&self) -> usize {
        self.arrays.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_probes(&self) -> usize {
        *self.probe_offsets.last().unwrap()
    }

    pub fn n_probes_of(&self, g: usize) -> usize {
        self.probe_offsets[g + 1] - self.probe_offsets[g]
    }

    /// Flat probe index of probe `j` in gene `g`.
    pub fn flat_probe(&self, g: usize, j: usize) -> usize {
        self.probe_offsets[g] + j
    }

    pub fn probe_range(&self, g: usize) -> std::ops::Range<usize> {
        self.probe_offsets[g]..self.probe_offsets[g + 1]
    }

    /// Gene owning flat probe `p`.
    pub fn gene_of(&self, p: usize) -> usize {
        self.probe_offsets.partition_point(|&o| o <= p) - 1
    }

    pub fn probe(&self, p: usize) -> &Probe {
        let g = self.gene_of(p);
        &self.genes[g].probes[p - self.probe_offsets[g]]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn require_channel(&self, name: &str) -> Result<usize> {
        self.channel_index(name)
            .ok_or_else(|| Error::ChannelMissing(name.to_string()))
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.genes.iter().position(|g| g.gene_id == id)
    }

    #[inline]
    fn offset(&self, p: usize, i: usize, h: usize) -> usize {
        (p * self.arrays.len() + i) * self.channels.len() + h
    }

    /// Intensity of flat probe `p` on array `i`, channel `h`.
    #[inline]
    pub fn value(&self, p: usize, i: usize, h: usize) -> f64 {
        self.intensities[self.offset(p, i, h)]
    }

    pub fn intensity(&self, g: usize, i: usize, j: usize, h: usize) -> f64 {
        self.value(self.flat_probe(g, j), i, h)
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    /// All intensities on array `i` (every probe and channel).
    pub fn array_values(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        let h_n = self.channels.len();
        (0..self.n_probes()).flat_map(move |p| (0..h_n).map(move |h| self.value(p, i, h)))
    }

    /// Arrays whose condition label equals `condition`.
    pub fn arrays_in_condition(&self, condition: u32) -> Vec<usize> {
        (0..self.arrays.len())
            .filter(|&i| self.arrays[i].condition == condition)
            .collect()
    }

    /// Restricts the dataset to `arrays` (in the given order), relabelling
    /// conditions through `relabel`.
    pub fn select_arrays(&self, arrays: &[usize], relabel: impl Fn(u32) -> u32) -> Result<Self> {
        if let Some(&bad) = arrays.iter().find(|&&i| i >= self.arrays.len()) {
            return Err(Error::InvalidParameter(format!("array index {bad} out of range")));
        }
        let h_n = self.channels.len();
        let mut data = Vec::with_capacity(self.n_probes() * arrays.len() * h_n);
        for p in 0..self.n_probes() {
            for &i in arrays {
                for h in 0..h_n {
                    data.push(self.value(p, i, h));
                }
            }
        }
        let metas = arrays
            .iter()
            .map(|&i| ArrayMeta {
                id: self.arrays[i].id.clone(),
                condition: relabel(self.arrays[i].condition),
            })
            .collect();
        ProbeLevelDataset::new(self.genes.clone(), metas, self.channels.clone(), data)
    }

    /// Keeps only the named channels, in the given order.
    pub fn select_channels(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names.iter().map(|n| self.require_channel(n)).collect::<Result<_>>()?;
        let genes = self
            .genes
            .iter()
            .map(|g| ProbeSet {
                gene_id: g.gene_id.clone(),
                probes: g
                    .probes
                    .iter()
                    .map(|p| Probe {
                        index: p.index,
                        sequences: idx.iter().map(|&h| p.sequences[h].clone()).collect(),
                    })
                    .collect(),
            })
            .collect();
        let mut data = Vec::with_capacity(self.n_probes() * self.n_arrays() * idx.len());
        for p in 0..self.n_probes() {
            for i in 0..self.n_arrays() {
                data.extend(idx.iter().map(|&h| self.value(p, i, h)));
            }
        }
        ProbeLevelDataset::new(
            genes,
            self.arrays.clone(),
            names.iter().map(|n| n.to_string()).collect(),
            data,
        )
    }

    /// Copy with every intensity transformed by `f(p, i, h, value)`.
    pub fn map_values(&self, f: impl Fn(usize, usize, usize, f64) -> f64) -> Result<Self> {
        let mut out = self.clone();
        for p in 0..self.n_probes() {
            for i in 0..self.n_arrays() {
                for h in 0..self.n_channels() {
                    let k = self.offset(p, i, h);
                    out.intensities[k] = f(p, i, h, self.intensities[k]);
                }
            }
        }
        ProbeLevelDataset::new(out.genes, out.arrays, out.channels, out.intensities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ProbeLevelDataset {
        let genes = vec![
            ProbeSet {
                gene_id: "g1".into(),
                probes: (0..2)
                    .map(|j| Probe {
                        index: j,
                        sequences: vec!["ACGT".into(), "ACCT".into()],
                    })
                    .collect(),
            },
            ProbeSet {
                gene_id: "g2".into(),
                probes: vec![Probe {
                    index: 0,
                    sequences: vec!["TTTT".into(), "TTAT".into()],
                }],
            },
        ];
        let arrays = vec![
            ArrayMeta {
                id: "a".into(),
                condition: 0,
            },
            ArrayMeta {
                id: "b".into(),
                condition: 1,
            },
        ];
        let data: Vec<f64> = (0..12).map(|k| k as f64).collect();
        ProbeLevelDataset::new(genes, arrays, vec![PM.into(), MM.into()], data).unwrap()
    }

    #[test]
    fn indexing() {
        let d = tiny();
        assert_eq!(d.n_probes(), 3);
        assert_eq!(d.intensity(0, 1, 1, 0), 6.0);
        assert_eq!(d.intensity(1, 0, 0, 1), 9.0);
        assert_eq!(d.gene_of(2), 1);
        assert_eq!(
            d.array_values(1).collect::<Vec<_>>(),
            vec![2.0, 3.0, 6.0, 7.0, 10.0, 11.0]
        );
    }

    #[test]
    fn select_arrays_reorders() {
        let d = tiny().select_arrays(&[1], |c| c + 5).unwrap();
        assert_eq!(d.n_arrays(), 1);
        assert_eq!(d.arrays()[0].condition, 6);
        assert_eq!(d.intensity(1, 0, 0, 1), 11.0);
    }

    #[test]
    fn rejects_negative_intensity() {
        let d = tiny();
        let mut v = d.intensities().to_vec();
        v[3] = -1.0;
        assert!(ProbeLevelDataset::new(d.genes().to_vec(), d.arrays().to_vec(), d.channels().to_vec(), v).is_err());
    }
}
