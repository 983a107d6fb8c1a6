use super::{GradStore, Matrix, NnError, ParamStore};

/// Adaptive-moment optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros = || params.iter().map(|(_, p)| Matrix::zeros(p.rows(), p.cols())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, idx: usize) -> &Matrix {
        &self.m[idx]
    }

    pub fn second_moment(&self, idx: usize) -> &Matrix {
        &self.v[idx]
    }

    /// One in-place update of `params` against `grads`.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradStore) -> Result<(), NnError> {
        grads.check_congruent(params)?;
        if self.m.len() != params.len() || (0..params.len()).any(|i| self.m[i].shape() != params.value(i).shape()) {
            return Err(NnError::Shape("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads.value(i).data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.value_mut(i).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
