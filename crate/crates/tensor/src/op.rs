use crate::tensor::Tensor;

/// Recorded forward operation. Each variant holds handles to its inputs plus
/// whatever the backward pass needs that is not recoverable from the inputs
/// (pool argmax indices, leaky slope, conv geometry).
pub(crate) enum Op {
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    AddScalar(Tensor),
    MulScalar(Tensor, f32),
    Neg(Tensor),
    Sqrt(Tensor),
    Square(Tensor),
    Matmul(Tensor, Tensor),
    SumAll(Tensor),
    MeanAll(Tensor),
    SumAxes(Tensor),
    MeanAxes(Tensor),
    Reshape(Tensor),
    Narrow {
        x: Tensor,
        axis: usize,
        start: usize,
    },
    BroadcastTo(Tensor),
    Concat0(Vec<Tensor>),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Relu(Tensor),
    LeakyRelu(Tensor, f32),
    Conv2d {
        x: Tensor,
        k: Tensor,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        x: Tensor,
        k: Tensor,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        x: Tensor,
        argmax: Vec<usize>,
    },
    AvgPool {
        x: Tensor,
        window: usize,
        stride: usize,
    },
    UpsampleNearest(Tensor, usize),
    FlipH(Tensor),
    Rot90(Tensor, u8),
    Translate {
        x: Tensor,
        dx: isize,
        dy: isize,
    },
    Mse {
        pred: Tensor,
        target: Tensor,
    },
    Bce {
        pred: Tensor,
        target: Tensor,
    },
    Cce {
        pred: Tensor,
        target: Tensor,
    },
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Neg(..) => "neg",
            Op::Sqrt(..) => "sqrt",
            Op::Square(..) => "square",
            Op::Matmul(..) => "matmul",
            Op::SumAll(..) => "sum_all",
            Op::MeanAll(..) => "mean_all",
            Op::SumAxes(..) => "sum_axes",
            Op::MeanAxes(..) => "mean_axes",
            Op::Reshape(..) => "reshape",
            Op::Narrow { .. } => "narrow",
            Op::BroadcastTo(..) => "broadcast_to",
            Op::Concat0(..) => "concat0",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvTranspose2d { .. } => "conv_transpose2d",
            Op::MaxPool { .. } => "max_pool",
            Op::AvgPool { .. } => "avg_pool",
            Op::UpsampleNearest(..) => "upsample_nearest",
            Op::FlipH(..) => "flip_h",
            Op::Rot90(..) => "rot90",
            Op::Translate { .. } => "translate",
            Op::Mse { .. } => "mse",
            Op::Bce { .. } => "bce",
            Op::Cce { .. } => "cce",
        }
    }

    pub(crate) fn parents(&self) -> Vec<&Tensor> {
        match self {
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::Matmul(a, b) => vec![a, b],
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::Neg(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::SumAll(a)
            | Op::MeanAll(a)
            | Op::SumAxes(a)
            | Op::MeanAxes(a)
            | Op::Reshape(a)
            | Op::BroadcastTo(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::LeakyRelu(a, _)
            | Op::UpsampleNearest(a, _)
            | Op::FlipH(a)
            | Op::Rot90(a, _) => vec![a],
            Op::Narrow { x, .. }
            | Op::MaxPool { x, .. }
            | Op::AvgPool { x, .. }
            | Op::Translate { x, .. } => vec![x],
            Op::Conv2d { x, k, .. } | Op::ConvTranspose2d { x, k, .. } => vec![x, k],
            Op::Mse { pred, target } | Op::Bce { pred, target } | Op::Cce { pred, target } => {
                vec![pred, target]
            }
            Op::Concat0(parts) => parts.iter().collect(),
        }
    }
}
