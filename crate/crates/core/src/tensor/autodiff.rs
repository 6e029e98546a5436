//! Reverse-mode differentiation over a graph of [`Tensor`] nodes.
//!
//! Every operation produces a new node holding its forward value and one
//! backward closure per differentiable parent. The closure maps the gradient
//! of the node to that parent's contribution. [`Tensor::backward`] walks the
//! graph once in reverse topological order.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{NdArray, Scalar};
use crate::error::{domain, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

pub(crate) type BackwardFn<T> = Box<dyn Fn(&NdArray<T>) -> NdArray<T>>;

struct Edge<T: Scalar> {
    parent: Tensor<T>,
    backward: BackwardFn<T>,
}

struct Node<T: Scalar> {
    id: usize,
    value: NdArray<T>,
    grad: RefCell<NdArray<T>>,
    requires_grad: bool,
    parents: Vec<Edge<T>>,
}

/// A differentiable tensor: a value plus its place in the graph.
///
/// Cloning is cheap and shares the node.
pub struct Tensor<T: Scalar>(Rc<Node<T>>);

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.value.shape())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    fn make(value: NdArray<T>, requires_grad: bool, parents: Vec<Edge<T>>) -> Self {
        let grad = RefCell::new(NdArray::zeros(value.shape().to_vec()));
        Tensor(Rc::new(Node { id: NEXT_ID.fetch_add(1, Ordering::Relaxed), value, grad, requires_grad, parents }))
    }

    /// Leaf node, optionally tracked for gradients.
    pub fn leaf(value: NdArray<T>, requires_grad: bool) -> Self {
        Self::make(value, requires_grad, Vec::new())
    }

    /// Trainable leaf.
    pub fn param(value: NdArray<T>) -> Self {
        Self::leaf(value, true)
    }

    /// Untracked leaf.
    pub fn constant(value: NdArray<T>) -> Self {
        Self::leaf(value, false)
    }

    /// Node produced by an operation. Parents that do not require gradients
    /// are dropped from the graph.
    pub(crate) fn from_op(value: NdArray<T>, parents: Vec<(Tensor<T>, BackwardFn<T>)>) -> Self {
        let edges: Vec<Edge<T>> = parents
            .into_iter()
            .filter(|(p, _)| p.requires_grad())
            .map(|(parent, backward)| Edge { parent, backward })
            .collect();
        let requires_grad = !edges.is_empty();
        Self::make(value, requires_grad, edges)
    }

    pub fn value(&self) -> &NdArray<T> {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn len(&self) -> usize {
        self.0.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.value.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Accumulated gradient of this node.
    pub fn grad(&self) -> NdArray<T> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        let shape = self.shape().to_vec();
        *self.0.grad.borrow_mut() = NdArray::zeros(shape);
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::constant(self.0.value.clone())
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    /// Back-propagates from this scalar node, adding `d(self)/d(node)` into
    /// the gradient of every node that requires it. Repeated calls
    /// accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return Err(domain(format!("backward needs a scalar root, got shape {:?}", self.shape())));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        let mut pending: HashMap<usize, NdArray<T>> = HashMap::new();
        pending.insert(self.0.id, NdArray::full(self.shape().to_vec(), T::one()));
        for node in order.iter().rev() {
            let Some(g) = pending.remove(&node.0.id) else {
                continue;
            };
            for edge in &node.0.parents {
                let contrib = (edge.backward)(&g);
                debug_assert_eq!(contrib.shape(), edge.parent.shape());
                match pending.get_mut(&edge.parent.0.id) {
                    Some(acc) => acc.add_assign(&contrib),
                    None => {
                        pending.insert(edge.parent.0.id, contrib);
                    }
                }
            }
            node.0.grad.borrow_mut().add_assign(&g);
        }
        Ok(())
    }

    /// Post-order (parents before children) over nodes requiring gradients.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.0.id);
        while let Some((node, next)) = stack.pop() {
            if next < node.0.parents.len() {
                let parent = node.0.parents[next].parent.clone();
                stack.push((node, next + 1));
                if visited.insert(parent.0.id) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        order
    }
}
