//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Var`] is a reference-counted node holding its forward value. Nodes
//! created from inputs that do not require gradients keep no parents and no
//! backward closure, so inference graphs release intermediates as soon as
//! they go out of scope.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Maps the output gradient to per-parent gradients.
/// Arguments: output gradient, parent values, output value.
pub(crate) type BackwardFn<T> =
    Box<dyn Fn(&Tensor<T>, &[&Tensor<T>], &Tensor<T>) -> Vec<Option<Tensor<T>>>>;

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

struct Node<T: Scalar> {
    id: u64,
    value: Tensor<T>,
    requires_grad: bool,
    parents: Vec<Var<T>>,
    backward: Option<BackwardFn<T>>,
}

impl<T: Scalar> Drop for Node<T> {
    // Iterative teardown: deep graphs would otherwise recurse once per node.
    fn drop(&mut self) {
        let mut stack = std::mem::take(&mut self.parents);
        while let Some(v) = stack.pop() {
            if let Ok(mut node) = Rc::try_unwrap(v.0) {
                stack.append(&mut node.parents);
            }
        }
    }
}

/// Differentiable tensor handle.
pub struct Var<T: Scalar>(Rc<Node<T>>);

impl<T: Scalar> Clone for Var<T> {
    fn clone(&self) -> Self {
        Var(Rc::clone(&self.0))
    }
}

impl<T: Scalar> std::fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.0.id)
            .field("requires_grad", &self.0.requires_grad)
            .field("value", &self.0.value)
            .finish()
    }
}

impl<T: Scalar> Var<T> {
    /// Leaf node; gradients are reported for it when `requires_grad`.
    pub fn leaf(value: Tensor<T>, requires_grad: bool) -> Self {
        Var(Rc::new(Node { id: next_id(), value, requires_grad, parents: Vec::new(), backward: None }))
    }

    pub fn constant(value: Tensor<T>) -> Self {
        Self::leaf(value, false)
    }

    /// Records an operation result. The closure is dropped when no parent
    /// requires a gradient.
    pub(crate) fn from_op(value: Tensor<T>, parents: Vec<Var<T>>, backward: BackwardFn<T>) -> Self {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        if !requires_grad {
            return Self::constant(value);
        }
        Var(Rc::new(Node {
            id: next_id(),
            value,
            requires_grad: true,
            parents,
            backward: Some(backward),
        }))
    }

    #[inline]
    pub fn value(&self) -> &Tensor<T> {
        &self.0.value
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    #[inline]
    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    /// Detached copy of the value.
    pub fn detach(&self) -> Self {
        Self::constant(self.value().clone())
    }

    /// Back-propagates from this node, which must hold a single element.
    /// Returns gradients of every reachable leaf that requires one.
    pub fn backward(&self) -> Grads<T> {
        assert_eq!(self.value().numel(), 1, "backward needs a scalar output");
        self.backward_with(Tensor::ones(self.shape()))
    }

    /// Back-propagates a given output gradient (vector-Jacobian product).
    pub fn backward_with(&self, seed: Tensor<T>) -> Grads<T> {
        assert_eq!(seed.shape(), self.shape(), "seed gradient shape");
        let mut leaves = HashMap::new();
        if !self.requires_grad() {
            return Grads { leaves };
        }

        let mut nodes: Vec<Var<T>> = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        seen.insert(self.id());
        while let Some(v) = stack.pop() {
            for p in &v.0.parents {
                if p.requires_grad() && seen.insert(p.id()) {
                    stack.push(p.clone());
                }
            }
            nodes.push(v);
        }
        // Ids increase with creation order, so descending id is a valid
        // reverse topological order.
        nodes.sort_unstable_by_key(|v| std::cmp::Reverse(v.id()));

        let mut pending: HashMap<u64, Tensor<T>> = HashMap::new();
        pending.insert(self.id(), seed);
        for node in nodes {
            let Some(grad) = pending.remove(&node.id()) else { continue };
            let Some(backward) = &node.0.backward else {
                leaves.insert(node.id(), grad);
                continue;
            };
            let parent_values: Vec<&Tensor<T>> = node.0.parents.iter().map(|p| p.value()).collect();
            let parent_grads = backward(&grad, &parent_values, node.value());
            debug_assert_eq!(parent_grads.len(), node.0.parents.len());
            for (p, g) in node.0.parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !p.requires_grad() {
                    continue;
                }
                debug_assert_eq!(g.shape(), p.shape(), "gradient shape for parent");
                match pending.get_mut(&p.id()) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        pending.insert(p.id(), g);
                    }
                }
            }
        }
        Grads { leaves }
    }
}

/// Leaf gradients produced by [`Var::backward`].
#[derive(Debug)]
pub struct Grads<T> {
    leaves: HashMap<u64, Tensor<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: &Var<T>) -> Option<&Tensor<T>> {
        self.leaves.get(&v.id())
    }

    pub fn take(&mut self, v: &Var<T>) -> Option<Tensor<T>> {
        self.leaves.remove(&v.id())
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}
