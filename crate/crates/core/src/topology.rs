//! Output-to-input wiring of a modular model.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// `((from_system, output), (to_system, input))`.
pub type PortLink = ((usize, usize), (usize, usize));

/// Interface sizes of one system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemSizes {
    pub n_in: usize,
    pub n_out: usize,
    pub n_st: usize,
}

/// Connection matrix `Φ` (`n_out_tot × n_in_tot`, one 1 per column) plus the
/// index maps between per-system and total vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    phi: DenseMatrix,
    /// Driving output of each input.
    driver: Vec<usize>,
    sizes: Vec<SystemSizes>,
    in_offsets: Vec<usize>,
    out_offsets: Vec<usize>,
    st_offsets: Vec<usize>,
}

fn prefix_sums(it: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    let mut out = vec![0];
    for v in it {
        acc += v;
        out.push(acc);
    }
    out
}

impl Topology {
    /// Builds `Φ` from `(output, input)` pairs in total-vector indexing.
    /// Every input must be driven by exactly one output; outputs may fan out.
    pub fn new(sizes: Vec<SystemSizes>, connections: &[(usize, usize)]) -> Result<Self> {
        let in_offsets = prefix_sums(sizes.iter().map(|s| s.n_in));
        let out_offsets = prefix_sums(sizes.iter().map(|s| s.n_out));
        let st_offsets = prefix_sums(sizes.iter().map(|s| s.n_st));
        let n_in = *in_offsets.last().unwrap();
        let n_out = *out_offsets.last().unwrap();

        let mut driver = vec![usize::MAX; n_in];
        let mut phi = DenseMatrix::zeros(n_out, n_in);
        for &(o, i) in connections {
            if o >= n_out {
                return Err(Error::ConnectionOutOfRange {
                    kind: "outputs",
                    index: o,
                    count: n_out,
                });
            }
            if i >= n_in {
                return Err(Error::ConnectionOutOfRange {
                    kind: "inputs",
                    index: i,
                    count: n_in,
                });
            }
            if driver[i] != usize::MAX {
                return Err(Error::MultiplyDrivenInput(i));
            }
            driver[i] = o;
            phi[(o, i)] = 1.0;
        }
        if let Some(i) = driver.iter().position(|&d| d == usize::MAX) {
            return Err(Error::UnconnectedInput(i));
        }
        Ok(Self {
            phi,
            driver,
            sizes,
            in_offsets,
            out_offsets,
            st_offsets,
        })
    }

    /// Builds a topology from per-system `(system, index)` pairs.
    pub fn from_ports(sizes: Vec<SystemSizes>, connections: &[PortLink]) -> Result<Self> {
        let in_offsets = prefix_sums(sizes.iter().map(|s| s.n_in));
        let out_offsets = prefix_sums(sizes.iter().map(|s| s.n_out));
        let flat: Vec<(usize, usize)> = connections
            .iter()
            .map(|&((ks, o), (kd, i))| (out_offsets[ks] + o, in_offsets[kd] + i))
            .collect();
        Self::new(sizes, &flat)
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn n_sys(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[SystemSizes] {
        &self.sizes
    }

    pub fn n_in_tot(&self) -> usize {
        *self.in_offsets.last().unwrap()
    }

    pub fn n_out_tot(&self) -> usize {
        *self.out_offsets.last().unwrap()
    }

    pub fn n_st_tot(&self) -> usize {
        *self.st_offsets.last().unwrap()
    }

    /// Total-vector index range of system `k`'s inputs.
    pub fn inputs_of(&self, k: usize) -> std::ops::Range<usize> {
        self.in_offsets[k]..self.in_offsets[k + 1]
    }

    pub fn outputs_of(&self, k: usize) -> std::ops::Range<usize> {
        self.out_offsets[k]..self.out_offsets[k + 1]
    }

    pub fn states_of(&self, k: usize) -> std::ops::Range<usize> {
        self.st_offsets[k]..self.st_offsets[k + 1]
    }

    /// Output driving total input `i`.
    pub fn driver(&self, i: usize) -> usize {
        self.driver[i]
    }

    /// `u = Φᵀ·y`: each input takes the value of its driving output.
    pub fn gather_inputs(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_out_tot() {
            return Err(Error::dims(
                "Topology::gather_inputs",
                self.n_out_tot(),
                y.len(),
            ));
        }
        Ok(self.driver.iter().map(|&o| y[o]).collect())
    }

    /// Applies `blockdiag(Φᵀ, Φᵀ)` to output values and derivatives.
    pub fn dispatch(&self, y: &[f64], y_dot: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.gather_inputs(y)?, self.gather_inputs(y_dot)?))
    }
}

/// Convenience wrapper over [`Topology::new`].
pub fn build_topology(connections: &[(usize, usize)], sizes: Vec<SystemSizes>) -> Result<Topology> {
    Topology::new(sizes, connections)
}

/// Free-function form of [`Topology::dispatch`].
pub fn dispatch(topo: &Topology, y_hat: &[f64], y_dot_hat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    topo.dispatch(y_hat, y_dot_hat)
}
