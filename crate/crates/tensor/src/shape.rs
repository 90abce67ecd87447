//! Shape arithmetic shared by the elementwise and reduction ops.
//!
//! Broadcasting is deliberately narrow: operands must have the same rank and
//! every dimension must either match or be 1 on one side. That covers bias
//! adds, per-channel scales and keepdim-reduced statistics without the full
//! numpy rank-promotion rules.

/// Broadcast result shape, or `None` if the shapes are incompatible.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == y {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else if y == 1 {
                Some(x)
            } else {
                None
            }
        })
        .collect()
}

/// Row-major strides for a dense shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Strides for indexing an operand of `shape` as if it had been broadcast to
/// a larger shape: broadcast dimensions contribute stride 0.
pub fn broadcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let dense = strides(shape);
    shape
        .iter()
        .zip(out_shape)
        .zip(dense)
        .map(|((&d, &o), s)| if d == o { s } else { 0 })
        .collect()
}

/// Walks every linear index of `out_shape`, handing the callback the matching
/// linear offsets into two broadcast operands.
pub fn for_each_broadcast<F: FnMut(usize, usize, usize)>(
    out_shape: &[usize],
    a_shape: &[usize],
    b_shape: &[usize],
    mut f: F,
) {
    let n: usize = out_shape.iter().product();
    if n == 0 {
        return;
    }
    let sa = broadcast_strides(a_shape, out_shape);
    let sb = broadcast_strides(b_shape, out_shape);
    let nd = out_shape.len();
    let mut idx = vec![0usize; nd];
    let mut ai = 0usize;
    let mut bi = 0usize;
    for oi in 0..n {
        f(oi, ai, bi);
        // mixed-radix increment
        for d in (0..nd).rev() {
            idx[d] += 1;
            ai += sa[d];
            bi += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            ai -= sa[d] * out_shape[d];
            bi -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

/// Sum-reduces `grad` (laid out as `from`) down to `to`, which must be
/// broadcast-compatible with `from` (dims equal or 1). Used to push gradients
/// back through broadcasting.
pub fn reduce_grad(grad: &[f32], from: &[usize], to: &[usize]) -> Vec<f32> {
    let to_n: usize = to.iter().product();
    let mut out = vec![0f64; to_n];
    let st = broadcast_strides(to, from);
    let nd = from.len();
    let mut idx = vec![0usize; nd];
    let mut ti = 0usize;
    for &g in grad {
        out[ti] += g as f64;
        for d in (0..nd).rev() {
            idx[d] += 1;
            ti += st[d];
            if idx[d] < from[d] {
                break;
            }
            ti -= st[d] * from[d];
            idx[d] = 0;
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}
