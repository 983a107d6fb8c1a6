use rand::Rng;

use super::{Matrix, NnError};

/// Shape and initialization scale of one parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Initial values are uniform in ±sqrt(1 / fan_in).
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize) -> Self {
        ParamSpec { name: name.into(), rows, cols, fan_in }
    }

    /// `name.w` (fan_in × fan_out) and `name.b` (1 × fan_out).
    pub fn dense(name: &str, fan_in: usize, fan_out: usize) -> [ParamSpec; 2] {
        [
            ParamSpec::new(format!("{name}.w"), fan_in, fan_out, fan_in),
            ParamSpec::new(format!("{name}.b"), 1, fan_out, fan_in),
        ]
    }
}

/// Named parameter matrices in a fixed order, tagged with the model
/// architecture that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    arch: String,
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new(arch: impl Into<String>) -> Self {
        ParamStore { arch: arch.into(), names: Vec::new(), values: Vec::new() }
    }

    /// Builds a store from `specs`, drawing every value from `rng`.
    pub fn init<R: Rng>(arch: impl Into<String>, specs: &[ParamSpec], rng: &mut R) -> Self {
        let mut store = ParamStore::new(arch);
        for s in specs {
            let bound = (1.0 / s.fan_in.max(1) as f64).sqrt();
            let data = (0..s.rows * s.cols).map(|_| rng.random_range(-bound..=bound)).collect();
            store.insert(&s.name, Matrix::new(s.rows, s.cols, data).expect("spec shape")).expect("unique spec names");
        }
        store
    }

    /// All-zero store with the shapes of `specs`.
    pub fn zeros(arch: impl Into<String>, specs: &[ParamSpec]) -> Self {
        let mut store = ParamStore::new(arch);
        for s in specs {
            store.insert(&s.name, Matrix::zeros(s.rows, s.cols)).expect("unique spec names");
        }
        store
    }

    pub fn insert(&mut self, name: &str, value: Matrix) -> Result<usize, NnError> {
        if self.index_of(name).is_some() {
            return Err(NnError::Format(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name.to_string());
        self.values.push(value);
        Ok(self.values.len() - 1)
    }

    pub fn arch(&self) -> &str {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn value(&self, idx: usize) -> &Matrix {
        &self.values[idx]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.values[idx]
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index_of(name).map(move |i| &mut self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalars.
    pub fn count_params(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Checks that `other` has the same architecture, names and shapes.
    pub fn check_compatible(&self, other: &ParamStore) -> Result<(), NnError> {
        if self.arch != other.arch {
            return Err(NnError::ShapeMismatch(format!("architecture `{}` vs `{}`", self.arch, other.arch)));
        }
        if self.names != other.names {
            return Err(NnError::ShapeMismatch("parameter names differ".into()));
        }
        for (name, (a, b)) in self.names.iter().zip(self.values.iter().zip(&other.values)) {
            if a.shape() != b.shape() {
                return Err(NnError::ShapeMismatch(format!("`{name}`: {:?} vs {:?}", a.shape(), b.shape())));
            }
        }
        Ok(())
    }
}

/// Count of the scalars in `specs`.
pub fn count_specs(specs: &[ParamSpec]) -> usize {
    specs.iter().map(|s| s.rows * s.cols).sum()
}

/// Gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    values: Vec<Matrix>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore { values: store.values.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, idx: usize) -> &Matrix {
        &self.values[idx]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.values[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.values.iter()
    }

    pub fn add_assign(&mut self, other: &GradStore) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for m in &mut self.values {
            m.scale_assign(k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|m| m.data().iter().all(|&x| x == 0.0))
    }

    pub fn check_congruent(&self, store: &ParamStore) -> Result<(), NnError> {
        if self.values.len() != store.len() {
            return Err(NnError::Shape(format!("{} gradients for {} parameters", self.values.len(), store.len())));
        }
        for (i, g) in self.values.iter().enumerate() {
            if g.shape() != store.value(i).shape() {
                return Err(NnError::Shape(format!("gradient of `{}` has shape {:?}", store.name(i), g.shape())));
            }
        }
        Ok(())
    }
}
