//! Dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Tensors are immutable once produced by an op; parameters are leaf tensors
//! whose storage the optimizer rewrites in place between steps. Every op that
//! sees a tracked input records a graph node holding the backward rule and
//! whatever activations that rule needs, so [`backward`] can replay the graph
//! in reverse topological order.

mod conv;
mod elementwise;
mod norm;
mod reduce;
mod structure;

pub use norm::{BatchNormState, BnMode};

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use num_traits::Float;
use thiserror::Error;

/// Floating-point element type of a [`Tensor`]. Gradient checks run at `f64`,
/// training runs at `f32`.
pub trait Scalar:
    Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + Default
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: {axis} mismatch: {detail}")]
    ShapeMismatch {
        op: &'static str,
        axis: &'static str,
        detail: String,
    },
    #[error("backward requires a scalar loss, got {numel} elements")]
    NonScalarLoss { numel: usize },
    #[error("backward: loss is not connected to any computation graph")]
    DisconnectedLoss,
    #[error("batch_norm: train mode requires batch size >= 2, got {batch}")]
    BatchTooSmall { batch: usize },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

fn shape_err(op: &'static str, axis: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, axis, detail }
}

thread_local! {
    static NEXT_TENSOR_ID: Cell<u64> = const { Cell::new(1) };
}

fn next_id() -> u64 {
    NEXT_TENSOR_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward rule: maps the upstream gradient to one optional gradient per
/// parent, in parent order. `None` marks a parent that needs no gradient.
type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>>>;

struct Node<T: Scalar> {
    #[allow(dead_code)]
    op: &'static str,
    parents: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Inner<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    node: Option<Node<T>>,
    requires_grad: bool,
}

/// N-dimensional dense tensor, cheap to clone (shared storage).
pub struct Tensor<T: Scalar> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={:?}, requires_grad={})",
            self.inner.id, self.inner.shape, self.inner.requires_grad
        )
    }
}

impl<T: Scalar> Tensor<T> {
    fn build(
        shape: Vec<usize>,
        data: Vec<T>,
        requires_grad: bool,
        node: Option<Node<T>>,
    ) -> Tensor<T> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Rc::new(Inner {
                id: next_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                node,
                requires_grad,
            }),
        }
    }

    /// Leaf tensor that does not accumulate gradients.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Tensor<T> {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor::build(shape.to_vec(), data, false, None)
    }

    /// Leaf tensor that accumulates gradients during backward.
    pub fn param(shape: &[usize], data: Vec<T>) -> Tensor<T> {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor::build(shape.to_vec(), data, true, None)
    }

    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        Tensor::from_vec(shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn full(shape: &[usize], value: T) -> Tensor<T> {
        Tensor::from_vec(shape, vec![value; shape.iter().product()])
    }

    pub fn scalar(value: T) -> Tensor<T> {
        Tensor::from_vec(&[1], vec![value])
    }

    /// Result of an op: tracked (given a graph node) only when some parent is.
    fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        op: &'static str,
        parents: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Tensor<T> {
        let tracked = parents.iter().any(|p| p.is_tracked());
        let node = if tracked {
            Some(Node {
                op,
                parents,
                backward,
            })
        } else {
            None
        };
        Tensor::build(shape, data, false, node)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Participates in graph construction: either accumulates gradient itself
    /// or was produced by a tracked op.
    pub fn is_tracked(&self) -> bool {
        self.inner.requires_grad || self.inner.node.is_some()
    }

    pub fn data(&self) -> std::cell::Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    /// In-place access for the optimizer; never call on a tensor that is part
    /// of a live graph.
    pub fn data_mut(&self) -> std::cell::RefMut<'_, Vec<T>> {
        self.inner.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() requires a one-element tensor");
        self.inner.data.borrow()[0]
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => {
                for (a, &v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// New leaf sharing this tensor's values but cut off from the graph.
    pub fn detach(&self) -> Tensor<T> {
        Tensor::from_vec(&self.inner.shape, self.to_vec())
    }

    /// Interprets the shape as NCHW.
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize), TensorError> {
        match self.inner.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            other => Err(shape_err(
                op,
                "rank",
                format!("expected 4-d NCHW tensor, got shape {other:?}"),
            )),
        }
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize), TensorError> {
        match self.inner.shape.as_slice() {
            &[n, f] => Ok((n, f)),
            other => Err(shape_err(
                op,
                "rank",
                format!("expected 2-d tensor, got shape {other:?}"),
            )),
        }
    }
}

/// Populates `grad` on every tracked leaf reachable from `loss`.
///
/// Gradients accumulate across calls until [`Tensor::zero_grad`]. The graph
/// is walked in reverse topological order, visiting each node exactly once.
pub fn backward<T: Scalar>(loss: &Tensor<T>) -> Result<(), TensorError> {
    if loss.numel() != 1 {
        return Err(TensorError::NonScalarLoss {
            numel: loss.numel(),
        });
    }
    if !loss.is_tracked() {
        return Err(TensorError::DisconnectedLoss);
    }

    let order = topo_order(loss);
    let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
    grads.insert(loss.id(), vec![T::one()]);

    for t in order.iter().rev() {
        let Some(g) = grads.remove(&t.id()) else {
            continue;
        };
        if t.requires_grad() {
            t.accumulate_grad(&g);
        }
        if let Some(node) = &t.inner.node {
            let parent_grads = (node.backward)(&g);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (parent, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !parent.is_tracked() {
                    continue;
                }
                debug_assert_eq!(pg.len(), parent.numel());
                match grads.get_mut(&parent.id()) {
                    Some(acc) => {
                        for (a, v) in acc.iter_mut().zip(pg) {
                            *a += v;
                        }
                    }
                    None => {
                        grads.insert(parent.id(), pg);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Iterative DFS postorder over the tensor DAG rooted at `loss`.
fn topo_order<T: Scalar>(loss: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order = Vec::new();
    let mut visited = std::collections::HashSet::new();
    // (tensor, children_pushed)
    let mut stack: Vec<(Tensor<T>, bool)> = vec![(loss.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !visited.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(node) = &t.inner.node {
            for p in &node.parents {
                if !visited.contains(&p.id()) {
                    stack.push((p.clone(), false));
                }
            }
        }
    }
    order
}
