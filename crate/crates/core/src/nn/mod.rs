//! Small dense-network kernel: matrices, a differentiation tape, Adam and a
//! binary weight format.

mod adam;
mod graph;
mod io;
mod layers;
mod matrix;
mod params;

use thiserror::Error;

pub use adam::Adam;
pub use graph::{sigmoid, Graph, Var};
pub use io::{load_weights, read_weights, save_weights, weights_to_bytes, write_weights, WEIGHTS_VERSION};
pub use layers::{activate, attention, attention_specs, dense as dense_layer, dueling, dueling_specs, Activation};
pub use matrix::Matrix;
pub use params::{count_specs, GradStore, ParamSpec, ParamStore};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("attention over an empty set")]
    EmptySet,
    #[error("incompatible parameters: {0}")]
    ShapeMismatch(String),
    #[error("invalid weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `act(x·W + b)` for a single input vector.
pub fn dense(x: &[f64], w: &Matrix, b: &[f64], act: Activation) -> Result<Vec<f64>, NnError> {
    if w.rows() != x.len() || w.cols() != b.len() {
        return Err(NnError::Shape(format!("x: {}, W: {:?}, b: {}", x.len(), w.shape(), b.len())));
    }
    let y = Matrix::row_vector(x).matmul(w);
    Ok(y.data()
        .iter()
        .zip(b)
        .map(|(v, b)| {
            let z = v + b;
            match act {
                Activation::Sigmoid => sigmoid(z),
                Activation::Relu => z.max(0.0),
                Activation::Identity => z,
            }
        })
        .collect())
}

/// Self-attention over `features` with the `prefix` block of `params`, then
/// the mean over the set.
pub fn mhsa_mean(features: &[Vec<f64>], params: &ParamStore, prefix: &str, heads: usize) -> Result<Vec<f64>, NnError> {
    if features.is_empty() {
        return Err(NnError::EmptySet);
    }
    let dim = params
        .get(&format!("{prefix}.q.w"))
        .ok_or_else(|| NnError::Shape(format!("no attention block `{prefix}`")))?
        .rows();
    if features.iter().any(|f| f.len() != dim) {
        return Err(NnError::Shape(format!("features must be {dim}-dimensional")));
    }
    let mut g = Graph::new(params);
    let x = g.input(Matrix::from_rows(features));
    let a = attention(&mut g, x, x, prefix, heads);
    let m = g.mean_rows(a);
    Ok(g.value(m).data().to_vec())
}

/// Dueling scores for one feature vector using `value.*` and `adv.*`.
pub fn dueling_head(f: &[f64], params: &ParamStore) -> Result<Vec<f64>, NnError> {
    let w = params.get("value.w").ok_or_else(|| NnError::Shape("no value head".into()))?;
    if w.rows() != f.len() {
        return Err(NnError::Shape(format!("feature width {} for a {}-wide head", f.len(), w.rows())));
    }
    let mut g = Graph::new(params);
    let x = g.input(Matrix::row_vector(f));
    let q = dueling(&mut g, x);
    Ok(g.value(q).data().to_vec())
}

pub fn count_params(store: &ParamStore) -> usize {
    store.count_params()
}
