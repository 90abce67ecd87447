//! Central finite-difference gradient checks for every differentiable op.
//!
//! The oracle is an independent f64 re-implementation of each forward
//! computation, living entirely in this file. Central differences (h = 1e-3)
//! on the oracle are compared against the engine's analytic f32 gradients at
//! max(1e-4 relative, 1e-6 absolute), 20 seeded random cases per op.

use albumgan_tensor::{bce, cce, mse, Tensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-3;
const CASES: usize = 20;

// ---------------------------------------------------------------------------
// f64 reference implementations (the oracle)
// ---------------------------------------------------------------------------

fn ref_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn ref_dot(w: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn ref_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            for l in 0..k {
                out[i * m + j] += a[i * k + l] * b[l * m + j];
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn ref_conv2d(
    x: &[f64],
    k: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * f * oh * ow];
    for ni in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                    continue;
                                }
                                acc += x[((ni * c + ci) * h + iy as usize) * w + ix as usize]
                                    * k[((fi * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((ni * f + fi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn ref_conv_transpose2d(
    x: &[f64],
    k: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let oh = (h - 1) * stride + kh - 2 * pad;
    let ow = (w - 1) * stride + kw - 2 * pad;
    let mut out = vec![0.0; n * f * oh * ow];
    for ni in 0..n {
        for ci in 0..c {
            for iy in 0..h {
                for ix in 0..w {
                    for fi in 0..f {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let oy = (iy * stride + ky) as isize - pad as isize;
                                let ox = (ix * stride + kx) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy as usize >= oh || ox as usize >= ow {
                                    continue;
                                }
                                out[((ni * f + fi) * oh + oy as usize) * ow + ox as usize] += x
                                    [((ni * c + ci) * h + iy) * w + ix]
                                    * k[((ci * f + fi) * kh + ky) * kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn ref_max_pool(x: &[f64], planes: usize, h: usize, w: usize, win: usize, stride: usize) -> Vec<f64> {
    let oh = (h - win) / stride + 1;
    let ow = (w - win) / stride + 1;
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..win {
                    for kx in 0..win {
                        best = best.max(x[p * h * w + (oy * stride + ky) * w + (ox * stride + kx)]);
                    }
                }
                out[(p * oh + oy) * ow + ox] = best;
            }
        }
    }
    out
}

fn ref_avg_pool(x: &[f64], planes: usize, h: usize, w: usize, win: usize, stride: usize) -> Vec<f64> {
    let oh = (h - win) / stride + 1;
    let ow = (w - win) / stride + 1;
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ky in 0..win {
                    for kx in 0..win {
                        acc += x[p * h * w + (oy * stride + ky) * w + (ox * stride + kx)];
                    }
                }
                out[(p * oh + oy) * ow + ox] = acc / (win * win) as f64;
            }
        }
    }
    out
}

fn ref_bce(p: &[f64], y: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let pc = p.clamp(1e-7, 1.0 - 1e-7);
            -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
        })
        .sum();
    s / p.len() as f64
}

fn ref_mse(p: &[f64], y: &[f64]) -> f64 {
    p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
}

// ---------------------------------------------------------------------------
// harness
// ---------------------------------------------------------------------------

type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f32>>;
type Builder = Box<dyn Fn(&[Tensor], &[Tensor]) -> Tensor>;
type Reference = Box<dyn Fn(&[Vec<f64>], &[Vec<f64>]) -> f64>;

struct Case {
    name: &'static str,
    /// (shape, sampler) for each differentiable input
    inputs: Vec<(Vec<usize>, Sampler)>,
    /// (shape, sampler) for each constant (loss weights, targets)
    aux: Vec<(Vec<usize>, Sampler)>,
    build: Builder,
    reference: Reference,
}

fn uniform(lo: f32, hi: f32) -> Sampler {
    Box::new(move |rng| vec![rng.gen_range(lo..hi)])
}

fn sample(shape: &[usize], s: &Sampler, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n: usize = shape.iter().product();
    (0..n).flat_map(|_| s(rng)).collect()
}

/// Uniform values bounded away from zero (for relu-family kinks and division).
fn away_from_zero(lo: f32, hi: f32, margin: f32) -> Sampler {
    Box::new(move |rng| {
        let mut v = rng.gen_range(lo..hi);
        if v.abs() < margin {
            v = if v >= 0.0 { margin } else { -margin };
        }
        vec![v]
    })
}

fn tol_ok(analytic: f64, fd: f64) -> bool {
    (analytic - fd).abs() <= (1e-4 * analytic.abs().max(fd.abs())).max(1e-6)
}

fn run_case(case: &Case) {
    for case_idx in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + case_idx as u64);
        let input_vals: Vec<Vec<f32>> = case
            .inputs
            .iter()
            .map(|(shape, s)| sample(shape, s, &mut rng))
            .collect();
        let aux_vals: Vec<Vec<f32>> = case
            .aux
            .iter()
            .map(|(shape, s)| sample(shape, s, &mut rng))
            .collect();

        let tensors: Vec<Tensor> = input_vals
            .iter()
            .zip(&case.inputs)
            .map(|(v, (shape, _))| Tensor::from_vec(v.clone(), shape).unwrap().requires_grad())
            .collect();
        let aux_tensors: Vec<Tensor> = aux_vals
            .iter()
            .zip(&case.aux)
            .map(|(v, (shape, _))| Tensor::from_vec(v.clone(), shape).unwrap())
            .collect();

        let loss = (case.build)(&tensors, &aux_tensors);
        loss.backward().unwrap();

        let inputs64: Vec<Vec<f64>> = input_vals
            .iter()
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .collect();
        let aux64: Vec<Vec<f64>> = aux_vals
            .iter()
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .collect();

        for (i, t) in tensors.iter().enumerate() {
            let grad = t
                .grad()
                .unwrap_or_else(|| panic!("{}: input {i} missing grad", case.name));
            for j in 0..grad.len() {
                let mut plus = inputs64.clone();
                plus[i][j] += H;
                let fp = (case.reference)(&plus, &aux64);
                let mut minus = inputs64.clone();
                minus[i][j] -= H;
                let fm = (case.reference)(&minus, &aux64);
                let fd = (fp - fm) / (2.0 * H);
                let a = grad[j] as f64;
                assert!(
                    tol_ok(a, fd),
                    "{} case {case_idx}: input {i}[{j}] analytic {a} vs fd {fd}",
                    case.name
                );
            }
        }
    }
}

/// Weighted-sum loss head: keeps every output element's gradient exercised
/// with O(1) magnitudes.
fn weighted(y: Tensor, w: &Tensor) -> Tensor {
    y.mul(w).unwrap().sum_all().unwrap()
}

// ---------------------------------------------------------------------------
// op cases
// ---------------------------------------------------------------------------

#[test]
fn gradcheck_elementwise_binary() {
    let cases = vec![
        Case {
            name: "add",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].add(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let y: Vec<f64> = x[0].iter().zip(&x[1]).map(|(p, q)| p + q).collect();
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "add_broadcast",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![1, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].add(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 6];
                for r in 0..2 {
                    for c in 0..3 {
                        y[r * 3 + c] = x[0][r * 3 + c] + x[1][c];
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "sub",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].sub(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let y: Vec<f64> = x[0].iter().zip(&x[1]).map(|(p, q)| p - q).collect();
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "mul_broadcast",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![2, 1], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].mul(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 6];
                for r in 0..2 {
                    for c in 0..3 {
                        y[r * 3 + c] = x[0][r * 3 + c] * x[1][r];
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "div",
            inputs: vec![
                (vec![2, 3], uniform(-1.0, 1.0)),
                (vec![2, 3], away_from_zero(-2.0, 2.0, 0.3)),
            ],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].div(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let y: Vec<f64> = x[0].iter().zip(&x[1]).map(|(p, q)| p / q).collect();
                ref_dot(&a[0], &y)
            }),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

#[test]
fn gradcheck_elementwise_unary() {
    let cases = vec![
        Case {
            name: "add_scalar",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].add_scalar(0.7).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v + 0.7).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "mul_scalar",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].mul_scalar(-1.3).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v * -1.3).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "neg",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].neg().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| -v).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "sqrt",
            inputs: vec![(vec![2, 3], uniform(0.1, 2.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].sqrt().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v.sqrt()).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "square",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].square().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v * v).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "sigmoid",
            inputs: vec![(vec![2, 3], uniform(-3.0, 3.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].sigmoid().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|&v| ref_sigmoid(v)).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "tanh",
            inputs: vec![(vec![2, 3], uniform(-3.0, 3.0))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].tanh().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v.tanh()).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "relu",
            inputs: vec![(vec![2, 3], away_from_zero(-1.0, 1.0, 0.05))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].relu().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &x[0].iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
            }),
        },
        Case {
            name: "leaky_relu",
            inputs: vec![(vec![2, 3], away_from_zero(-1.0, 1.0, 0.05))],
            aux: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].leaky_relu(0.2).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(
                    &a[0],
                    &x[0]
                        .iter()
                        .map(|&v| if v > 0.0 { v } else { 0.2 * v })
                        .collect::<Vec<_>>(),
                )
            }),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

#[test]
fn gradcheck_matmul_and_reductions() {
    let cases = vec![
        Case {
            name: "matmul",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![3, 2], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 2], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].matmul(&x[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| ref_dot(&a[0], &ref_matmul(&x[0], &x[1], 2, 3, 2))),
        },
        Case {
            name: "sum_all",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![],
            build: Box::new(|x, _| x[0].sum_all().unwrap()),
            reference: Box::new(|x, _| x[0].iter().sum()),
        },
        Case {
            name: "mean_all",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![],
            build: Box::new(|x, _| x[0].mean_all().unwrap()),
            reference: Box::new(|x, _| x[0].iter().sum::<f64>() / 6.0),
        },
        Case {
            name: "sum_axes",
            inputs: vec![(vec![2, 3, 2], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 3, 1], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].sum_axes(&[0, 2]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 3];
                for i in 0..2 {
                    for j in 0..3 {
                        for k in 0..2 {
                            y[j] += x[0][(i * 3 + j) * 2 + k];
                        }
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "mean_axes",
            inputs: vec![(vec![2, 3, 2], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 1, 2], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].mean_axes(&[1]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 4];
                for i in 0..2 {
                    for k in 0..2 {
                        for j in 0..3 {
                            y[i * 2 + k] += x[0][(i * 3 + j) * 2 + k] / 3.0;
                        }
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

#[test]
fn gradcheck_shape_and_movement() {
    let cases = vec![
        Case {
            name: "reshape",
            inputs: vec![(vec![2, 6], uniform(-1.0, 1.0))],
            aux: vec![(vec![3, 4], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].reshape(&[3, 4]).unwrap(), &a[0])),
            reference: Box::new(|x, a| ref_dot(&a[0], &x[0])),
        },
        Case {
            name: "narrow",
            inputs: vec![(vec![2, 4, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 2, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].narrow(1, 1, 2).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = Vec::new();
                for i in 0..2 {
                    for j in 1..3 {
                        for k in 0..3 {
                            y.push(x[0][(i * 4 + j) * 3 + k]);
                        }
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "broadcast_to",
            inputs: vec![(vec![2, 1, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![2, 4, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].broadcast_to(&[2, 4, 3]).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = Vec::new();
                for i in 0..2 {
                    for _ in 0..4 {
                        for k in 0..3 {
                            y.push(x[0][i * 3 + k]);
                        }
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "concat0",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![1, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![3, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| {
                weighted(Tensor::concat0(&[x[0].clone(), x[1].clone()]).unwrap(), &a[0])
            }),
            reference: Box::new(|x, a| {
                let mut y = x[0].clone();
                y.extend_from_slice(&x[1]);
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "upsample_nearest",
            inputs: vec![(vec![1, 1, 3, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 1, 6, 6], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].upsample_nearest(2).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 36];
                for oy in 0..6 {
                    for ox in 0..6 {
                        y[oy * 6 + ox] = x[0][(oy / 2) * 3 + ox / 2];
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "flip_h",
            inputs: vec![(vec![1, 1, 3, 4], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 1, 3, 4], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].flip_h().unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 12];
                for r in 0..3 {
                    for c in 0..4 {
                        y[r * 4 + c] = x[0][r * 4 + (3 - c)];
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "rot90",
            inputs: vec![(vec![1, 1, 4, 4], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 1, 4, 4], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].rot90(1).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                // one clockwise quarter turn: out(y, x) = in(3 - x, y)
                let mut y = vec![0.0; 16];
                for r in 0..4 {
                    for c in 0..4 {
                        y[r * 4 + c] = x[0][(3 - c) * 4 + r];
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
        Case {
            name: "translate",
            inputs: vec![(vec![1, 1, 4, 4], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 1, 4, 4], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].translate(1, -1).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 16];
                for r in 0..4usize {
                    for c in 0..4usize {
                        let sy = r as isize + 1;
                        let sx = c as isize - 1;
                        if sy >= 0 && sy < 4 && sx >= 0 && sx < 4 {
                            y[r * 4 + c] = x[0][sy as usize * 4 + sx as usize];
                        }
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

#[test]
fn gradcheck_conv_and_pool() {
    let cases = vec![
        Case {
            name: "conv2d_s2p1",
            inputs: vec![
                (vec![1, 2, 5, 5], uniform(-1.0, 1.0)),
                (vec![2, 2, 3, 3], uniform(-1.0, 1.0)),
            ],
            aux: vec![(vec![1, 2, 3, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].conv2d(&x[1], 2, 1).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &ref_conv2d(&x[0], &x[1], 1, 2, 5, 5, 2, 3, 3, 2, 1))
            }),
        },
        Case {
            name: "conv2d_s1p0",
            inputs: vec![
                (vec![1, 1, 4, 4], uniform(-1.0, 1.0)),
                (vec![1, 1, 3, 3], uniform(-1.0, 1.0)),
            ],
            aux: vec![(vec![1, 1, 2, 2], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].conv2d(&x[1], 1, 0).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &ref_conv2d(&x[0], &x[1], 1, 1, 4, 4, 1, 3, 3, 1, 0))
            }),
        },
        Case {
            name: "conv_transpose2d_s2p1",
            inputs: vec![
                (vec![1, 2, 3, 3], uniform(-1.0, 1.0)),
                (vec![2, 2, 4, 4], uniform(-1.0, 1.0)),
            ],
            aux: vec![(vec![1, 2, 6, 6], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].conv_transpose2d(&x[1], 2, 1).unwrap(), &a[0])),
            reference: Box::new(|x, a| {
                ref_dot(&a[0], &ref_conv_transpose2d(&x[0], &x[1], 1, 2, 3, 3, 2, 4, 4, 2, 1))
            }),
        },
        Case {
            name: "avg_pool",
            inputs: vec![(vec![1, 2, 4, 4], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 2, 2, 2], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| weighted(x[0].avg_pool(2, 2).unwrap(), &a[0])),
            reference: Box::new(|x, a| ref_dot(&a[0], &ref_avg_pool(&x[0], 2, 4, 4, 2, 2))),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

#[test]
fn gradcheck_max_pool_with_separated_values() {
    // values drawn as a shuffled ramp so window maxima sit well clear of the
    // finite-difference step
    for case_idx in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa11_0000 + case_idx as u64);
        let mut vals: Vec<f32> = (0..16).map(|i| i as f32 * 0.05).collect();
        for i in (1..vals.len()).rev() {
            let j = rng.gen_range(0..=i);
            vals.swap(i, j);
        }
        let w: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let x = Tensor::from_vec(vals.clone(), &[1, 1, 4, 4]).unwrap().requires_grad();
        let wt = Tensor::from_vec(w.clone(), &[1, 1, 2, 2]).unwrap();
        let loss = weighted(x.max_pool(2, 2).unwrap(), &wt);
        loss.backward().unwrap();
        let grad = x.grad().unwrap();

        let vals64: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
        let w64: Vec<f64> = w.iter().map(|&v| v as f64).collect();
        for j in 0..16 {
            let mut plus = vals64.clone();
            plus[j] += H;
            let fp = ref_dot(&w64, &ref_max_pool(&plus, 1, 4, 4, 2, 2));
            let mut minus = vals64.clone();
            minus[j] -= H;
            let fm = ref_dot(&w64, &ref_max_pool(&minus, 1, 4, 4, 2, 2));
            let fd = (fp - fm) / (2.0 * H);
            assert!(
                tol_ok(grad[j] as f64, fd),
                "max_pool case {case_idx} element {j}: {} vs {fd}",
                grad[j]
            );
        }
    }
}

#[test]
fn gradcheck_losses_and_composites() {
    let cases = vec![
        Case {
            name: "mse",
            inputs: vec![(vec![2, 3], uniform(-1.0, 1.0)), (vec![2, 3], uniform(-1.0, 1.0))],
            aux: vec![],
            build: Box::new(|x, _| mse(&x[0], &x[1]).unwrap()),
            reference: Box::new(|x, _| ref_mse(&x[0], &x[1])),
        },
        Case {
            name: "bce",
            inputs: vec![(vec![2, 3], uniform(0.1, 0.9)), (vec![2, 3], uniform(0.2, 0.8))],
            aux: vec![],
            build: Box::new(|x, _| bce(&x[0], &x[1]).unwrap()),
            reference: Box::new(|x, _| ref_bce(&x[0], &x[1])),
        },
        Case {
            name: "cce",
            inputs: vec![(vec![2, 3], uniform(0.1, 0.9)), (vec![2, 3], uniform(0.2, 0.8))],
            aux: vec![],
            build: Box::new(|x, _| cce(&x[0], &x[1]).unwrap()),
            reference: Box::new(|x, _| {
                let s: f64 = x[0]
                    .iter()
                    .zip(&x[1])
                    .map(|(&p, &y)| -y * p.clamp(1e-7, 1.0 - 1e-7).ln())
                    .sum();
                s / 2.0
            }),
        },
        Case {
            // one dense layer into mse: the spec's derived composite case
            name: "dense_mse",
            inputs: vec![
                (vec![2, 3], uniform(-1.0, 1.0)),
                (vec![3, 2], uniform(-1.0, 1.0)),
                (vec![1, 2], uniform(-1.0, 1.0)),
            ],
            aux: vec![(vec![2, 2], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| {
                let y = x[0].matmul(&x[1]).unwrap().add(&x[2]).unwrap().sigmoid().unwrap();
                mse(&y, &a[0]).unwrap()
            }),
            reference: Box::new(|x, a| {
                let mm = ref_matmul(&x[0], &x[1], 2, 3, 2);
                let y: Vec<f64> = mm
                    .iter()
                    .enumerate()
                    .map(|(i, v)| ref_sigmoid(v + x[2][i % 2]))
                    .collect();
                ref_mse(&y, &a[0])
            }),
        },
        Case {
            // instance standardization: mean/var/sqrt/broadcast chain
            name: "standardize_composite",
            inputs: vec![(vec![1, 2, 3, 3], uniform(-1.0, 1.0))],
            aux: vec![(vec![1, 2, 3, 3], uniform(-1.0, 1.0))],
            build: Box::new(|x, a| {
                let mu = x[0].mean_axes(&[2, 3]).unwrap();
                let centered = x[0].sub(&mu).unwrap();
                let var = centered.square().unwrap().mean_axes(&[2, 3]).unwrap();
                let y = centered.div(&var.add_scalar(1e-3).unwrap().sqrt().unwrap()).unwrap();
                weighted(y, &a[0])
            }),
            reference: Box::new(|x, a| {
                let mut y = vec![0.0; 18];
                for c in 0..2 {
                    let plane = &x[0][c * 9..(c + 1) * 9];
                    let mu: f64 = plane.iter().sum::<f64>() / 9.0;
                    let var: f64 = plane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / 9.0;
                    let denom = (var + 1e-3).sqrt();
                    for i in 0..9 {
                        y[c * 9 + i] = (plane[i] - mu) / denom;
                    }
                }
                ref_dot(&a[0], &y)
            }),
        },
    ];
    for c in &cases {
        run_case(c);
    }
}

// ---------------------------------------------------------------------------
// adjoint and determinism invariants
// ---------------------------------------------------------------------------

/// conv2d's recorded backward must be the exact adjoint of its forward on
/// small instances: dx == M^T g where M is the explicit conv matrix.
#[test]
fn conv2d_backward_is_the_adjoint_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for &(h, k, s, p) in &[(4usize, 3usize, 1usize, 0usize), (5, 3, 2, 1), (6, 4, 2, 1)] {
        let oh = (h + 2 * p - k) / s + 1;
        let n_in = h * h;
        let n_out = oh * oh;
        let kernel: Vec<f32> = (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k64: Vec<f64> = kernel.iter().map(|&v| v as f64).collect();

        // explicit matrix from the f64 reference, one basis vector at a time
        let mut mat = vec![0.0f64; n_out * n_in];
        for j in 0..n_in {
            let mut basis = vec![0.0f64; n_in];
            basis[j] = 1.0;
            let col = ref_conv2d(&basis, &k64, 1, 1, h, h, 1, k, k, s, p);
            for (i, v) in col.iter().enumerate() {
                mat[i * n_in + j] = *v;
            }
        }

        let xv: Vec<f32> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gv: Vec<f32> = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor::from_vec(xv, &[1, 1, h, h]).unwrap().requires_grad();
        let kt = Tensor::from_vec(kernel, &[1, 1, k, k]).unwrap();
        let g = Tensor::from_vec(gv.clone(), &[1, 1, oh, oh]).unwrap();
        let loss = x.conv2d(&kt, s, p).unwrap().mul(&g).unwrap().sum_all().unwrap();
        loss.backward().unwrap();
        let dx = x.grad().unwrap();

        for j in 0..n_in {
            let mut expect = 0.0f64;
            for i in 0..n_out {
                expect += mat[i * n_in + j] * gv[i] as f64;
            }
            assert!(
                (dx[j] as f64 - expect).abs() < 1e-5,
                "adjoint mismatch at {j} for h={h} k={k} s={s} p={p}"
            );
        }
    }
}

/// Same seed + same ops => bit-identical values and gradients.
#[test]
fn tape_replay_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = Tensor::randn(&[2, 1, 6, 6], &mut rng).requires_grad();
        let k = Tensor::randn(&[2, 1, 3, 3], &mut rng).requires_grad();
        let y = x
            .conv2d(&k, 1, 1)
            .unwrap()
            .leaky_relu(0.2)
            .unwrap()
            .avg_pool(2, 2)
            .unwrap()
            .sigmoid()
            .unwrap();
        let target = Tensor::zeros(y.shape());
        let loss = mse(&y, &target).unwrap();
        loss.backward().unwrap();
        (
            loss.item().to_bits(),
            y.to_vec().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            x.grad().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            k.grad().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        )
    };
    assert_eq!(run(), run());
}
