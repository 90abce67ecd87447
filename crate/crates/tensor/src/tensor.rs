use std::cell::{Cell, Ref, RefCell};
use std::fmt;
use std::rc::Rc;

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::op::Op;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Dense n-dimensional f32 array participating in the gradient graph.
///
/// Cloning a `Tensor` clones the handle, not the storage. Values are written
/// once by the op that creates them and never mutated afterwards, except for
/// leaf parameters updated by the optimizer between forward passes. Every
/// stored value is finite; any op that would produce NaN/Inf fails instead.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

pub(crate) struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f32>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f32>>>,
    op: Option<Op>,
}

impl Tensor {
    fn build(data: Vec<f32>, shape: Vec<usize>, requires_grad: bool, op: Option<Op>) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: next_id(),
                shape,
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
                op,
            }),
        }
    }

    /// Leaf tensor from raw data. Fails on shape/len disagreement or
    /// non-finite values.
    pub fn from_vec(data: Vec<f32>, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "from_vec",
                lhs: shape.to_vec(),
                rhs: vec![data.len()],
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: "from_vec" });
        }
        Ok(Tensor::build(data, shape.to_vec(), false, None))
    }

    /// Graph node produced by `op`. Validates finiteness of the result; the
    /// node requires grad iff any parent does.
    pub(crate) fn from_op(data: Vec<f32>, shape: Vec<usize>, op: Op) -> Result<Tensor> {
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: op.name() });
        }
        let requires_grad = op.parents().iter().any(|p| p.requires_grad_flag());
        Ok(Tensor::build(data, shape, requires_grad, Some(op)))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::build(vec![0.0; n], shape.to_vec(), false, None)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        assert!(value.is_finite(), "full: non-finite fill value");
        let n = shape.iter().product();
        Tensor::build(vec![value; n], shape.to_vec(), false, None)
    }

    /// Rank-0 scalar.
    pub fn scalar(value: f32) -> Result<Tensor> {
        Tensor::from_vec(vec![value], &[])
    }

    /// Standard-normal samples via Box-Muller, deterministic for a given rng.
    pub fn randn<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        while data.len() < n {
            let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt();
            let t = 2.0 * std::f64::consts::PI * u2;
            data.push((r * t.cos()) as f32);
            if data.len() < n {
                data.push((r * t.sin()) as f32);
            }
        }
        Tensor::build(data, shape.to_vec(), false, None)
    }

    /// Uniform samples in [0, 1).
    pub fn rand<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen::<f32>()).collect();
        Tensor::build(data, shape.to_vec(), false, None)
    }

    /// Marks a leaf as trainable. Consumes the handle; only valid before the
    /// tensor has been used as an op input.
    pub fn requires_grad(self) -> Tensor {
        assert!(
            self.inner.op.is_none(),
            "requires_grad may only be set on leaf tensors"
        );
        let data = self.inner.data.borrow().clone();
        let shape = self.inner.shape.clone();
        Tensor::build(data, shape, true, None)
    }

    /// Leaf copy that does not participate in the gradient graph.
    pub fn detach(&self) -> Tensor {
        Tensor::build(self.to_vec(), self.inner.shape.clone(), false, None)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.data.borrow().len()
    }

    pub fn is_requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn requires_grad_flag(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f32>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.inner.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        let d = self.inner.data.borrow();
        assert_eq!(d.len(), 1, "item() requires exactly one element");
        d[0]
    }

    /// Current gradient, if backward has populated one.
    pub fn grad(&self) -> Option<Vec<f32>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Overwrites leaf data in place (optimizer updates, weight loading).
    pub fn set_data(&self, data: &[f32]) -> Result<()> {
        if data.len() != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "set_data",
                lhs: self.inner.shape.clone(),
                rhs: vec![data.len()],
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: "set_data" });
        }
        self.inner.data.borrow_mut().copy_from_slice(data);
        Ok(())
    }

    pub(crate) fn op(&self) -> Option<&Op> {
        self.inner.op.as_ref()
    }

    /// Adds `delta` into the gradient buffer (allocating zeros on first use).
    /// No-op for tensors outside the gradient graph.
    pub(crate) fn accumulate_grad(&self, delta: &[f32]) {
        if !self.inner.requires_grad {
            return;
        }
        let mut g = self.inner.grad.borrow_mut();
        match g.as_mut() {
            Some(buf) => {
                for (b, d) in buf.iter_mut().zip(delta) {
                    *b += d;
                }
            }
            None => *g = Some(delta.to_vec()),
        }
    }

    pub(crate) fn seed_grad_ones(&self) {
        *self.inner.grad.borrow_mut() = Some(vec![1.0; self.numel()]);
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}
