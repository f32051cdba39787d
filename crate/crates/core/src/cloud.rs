use crate::error::{invalid, Result};

/// `N` points in `R^d` with uniform weights `1/N`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Cloud {
    dim: usize,
    data: Vec<f64>,
}

/// The empirical measure `rho^N` a consensus point is taken over.
pub type EmpiricalMeasure = Cloud;
/// A sample from one solver, compared against another by the metrics.
pub type SampleCloud = Cloud;

impl Cloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("cloud dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "cloud buffer of length {} does not hold a nonempty set of {dim}-d points",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("points of mixed dimension"));
        }
        Self::new(dim, points.concat())
    }

    /// One-dimensional cloud from scalar samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}
