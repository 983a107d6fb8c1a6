use super::graph::{Graph, Var};
use super::ParamSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

pub fn activate(g: &mut Graph<'_>, x: Var, act: Activation) -> Var {
    match act {
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Relu => g.relu(x),
        Activation::Identity => x,
    }
}

/// `act(x · prefix.w + prefix.b)` applied to every row of `x`.
pub fn dense(g: &mut Graph<'_>, x: Var, prefix: &str, act: Activation) -> Var {
    let w = g.param(&format!("{prefix}.w"));
    let b = g.param(&format!("{prefix}.b"));
    let xw = g.matmul(x, w);
    let y = g.add_row(xw, b);
    activate(g, y, act)
}

/// Query, key, value and output projections of a `dim`-wide attention block.
pub fn attention_specs(prefix: &str, dim: usize) -> Vec<ParamSpec> {
    ["q", "k", "v", "o"]
        .iter()
        .flat_map(|p| ParamSpec::dense(&format!("{prefix}.{p}"), dim, dim))
        .collect()
}

/// Multi-head scaled dot-product attention. Each row of `queries` attends
/// over all rows of `keys`; pass the same var twice for self-attention.
pub fn attention(g: &mut Graph<'_>, queries: Var, keys: Var, prefix: &str, heads: usize) -> Var {
    let dim = g.shape(queries).1;
    assert!(heads > 0 && dim.is_multiple_of(heads), "{dim} not divisible into {heads} heads");
    let hd = dim / heads;
    let q = dense(g, queries, &format!("{prefix}.q"), Activation::Identity);
    let k = dense(g, keys, &format!("{prefix}.k"), Activation::Identity);
    let v = dense(g, keys, &format!("{prefix}.v"), Activation::Identity);
    let scale = 1.0 / (hd as f64).sqrt();
    let mut ctx = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * hd, hd);
        let kh = g.slice_cols(k, h * hd, hd);
        let vh = g.slice_cols(v, h * hd, hd);
        let kt = g.transpose(kh);
        let s = g.matmul(qh, kt);
        let s = g.scale(s, scale);
        let a = g.softmax_rows(s);
        ctx.push(g.matmul(a, vh));
    }
    let joined = g.concat_cols(&ctx);
    dense(g, joined, &format!("{prefix}.o"), Activation::Identity)
}

/// `value` (dim → 1) and `adv` (dim → actions) heads.
pub fn dueling_specs(dim: usize, actions: usize) -> Vec<ParamSpec> {
    let mut s = ParamSpec::dense("value", dim, 1).to_vec();
    s.extend(ParamSpec::dense("adv", dim, actions));
    s
}

/// Row-wise `V + A - mean(A)`.
pub fn dueling(g: &mut Graph<'_>, f: Var) -> Var {
    let v = dense(g, f, "value", Activation::Identity);
    let a = dense(g, f, "adv", Activation::Identity);
    let am = g.mean_cols(a);
    let shift = g.sub(v, am);
    g.add_col(a, shift)
}
