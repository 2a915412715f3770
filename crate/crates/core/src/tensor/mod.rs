//! Reverse-mode automatic differentiation over dense 64-bit float tensors.
//!
//! The graph is define-by-run: every operation on a gradient-tracked tensor
//! records itself into the result, and [`Tensor::backward`] walks the
//! recorded operations in reverse topological order. Graphs are freed when
//! the tensors holding them drop, so each training step builds and discards
//! its own tape. Leaf tensors created with [`Tensor::param`] accumulate
//! gradients across backward calls until [`Tensor::zero_grad`].

mod op;
mod ops;

pub(crate) use op::Op;

/// The SeLU negative saturation value `−λα`, the fill value of alpha dropout.
pub fn selu_saturation() -> f64 {
    -op::SELU_LAMBDA * op::SELU_ALPHA
}

use crate::error::{CoreError, Result};
use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Runs `f` with gradient recording disabled on this thread. Used for
/// evaluation passes so they do not build tape nodes.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let prev = GRAD_ENABLED.with(|c| c.replace(false));
    let out = f();
    GRAD_ENABLED.with(|c| c.set(prev));
    out
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    op: Option<Op>,
}

/// Dense n-dimensional array of `f64` with optional gradient tracking.
/// Cloning is cheap (shared node).
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    let expect: usize = shape.iter().product();
    if expect != len {
        return Err(CoreError::shape(
            "from_vec",
            format!("shape {shape:?} wants {expect} values, got {len}"),
        ));
    }
    Ok(())
}

impl Tensor {
    fn new(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Option<Op>) -> Tensor {
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

    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>, op: Op) -> Tensor {
        Tensor::new(shape, data, true, Some(op))
    }

    pub(crate) fn detached(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data, false, None)
    }

    /// Non-tracked tensor from a flat buffer.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_len(shape, data.len())?;
        Ok(Tensor::new(shape.to_vec(), data, false, None))
    }

    /// Gradient-tracked leaf (a trainable parameter).
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_len(shape, data.len())?;
        Ok(Tensor::new(shape.to_vec(), data, true, None))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![0.0; len], false, None)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::new(vec![], vec![value], false, None)
    }

    /// 2-D convenience constructor (row-major).
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Tensor::from_vec(&[rows, cols], data)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.inner.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.inner.shape[1]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn is_leaf(&self) -> bool {
        self.inner.op.is_none()
    }

    /// Copy of the underlying buffer.
    pub fn values(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    pub(crate) fn data_ref(&self) -> std::cell::Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.inner.shape);
        self.inner.data.borrow()[0]
    }

    /// Overwrites the buffer in place (shape unchanged). Graphs built from
    /// the old values are stale afterwards; intended for parameter updates
    /// and finite-difference probes between forward passes.
    pub fn set_data(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.len() {
            return Err(CoreError::shape(
                "set_data",
                format!("expected {} values, got {}", self.len(), data.len()),
            ));
        }
        self.inner.data.borrow_mut().copy_from_slice(data);
        Ok(())
    }

    /// In-place update, used by the optimizer.
    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.inner.data.borrow_mut());
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// In-place rescale of the accumulated gradient (used by clipping).
    pub fn scale_grad(&self, factor: f64) {
        if let Some(g) = self.inner.grad.borrow_mut().as_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, contribution: &[f64]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contribution) {
                    *gi += ci;
                }
            }
            None => *slot = Some(contribution.to_vec()),
        }
    }

    fn reset_interior_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Reverse-mode pass from a scalar loss. Populates `grad` on every
    /// gradient-tracked leaf reachable from the loss; repeated calls without
    /// [`Tensor::zero_grad`] accumulate leaf gradients additively.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(CoreError::invalid(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.inner.shape
            )));
        }
        if !self.inner.requires_grad {
            return Err(CoreError::invalid(
                "backward on a tensor with no recorded operations",
            ));
        }
        let order = self.topo_order();
        // Interior grads are scratch space for this pass only; leaves keep
        // their accumulated values.
        for node in &order {
            if !node.is_leaf() {
                node.reset_interior_grad();
            }
        }
        self.accumulate_grad(&[1.0]);
        for node in &order {
            let Some(op) = &node.inner.op else { continue };
            let grad = node
                .inner
                .grad
                .borrow()
                .clone()
                .expect("gradient populated before visit");
            op.backward(&grad, node);
        }
        Ok(())
    }

    /// Reverse topological order (loss first) over the gradient-tracked
    /// subgraph.
    fn topo_order(&self) -> Vec<Tensor> {
        enum Frame {
            Enter(Tensor),
            Exit(Tensor),
        }
        let mut visited: HashSet<u64> = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![Frame::Enter(self.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(t) => {
                    if !visited.insert(t.id()) {
                        continue;
                    }
                    stack.push(Frame::Exit(t.clone()));
                    if let Some(op) = &t.inner.op {
                        for input in op.inputs() {
                            if input.requires_grad() && !visited.contains(&input.id()) {
                                stack.push(Frame::Enter(input.clone()));
                            }
                        }
                    }
                }
                Frame::Exit(t) => order.push(t),
            }
        }
        order.reverse();
        order
    }
}
