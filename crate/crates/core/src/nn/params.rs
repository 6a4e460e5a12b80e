//! Named parameter storage, initialisation, and the per-forward session that
//! turns stored tensors into graph leaves.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autograd::{Grads, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Updated by the optimiser and counted as a model parameter.
    Trainable,
    /// State carried alongside the weights (batch-norm running statistics).
    Buffer,
}

#[derive(Clone, Debug)]
pub struct ParamEntry<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
}

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of named tensors.
#[derive(Clone, Debug)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore { entries: Vec::new(), index: HashMap::new() }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: String, kind: ParamKind, value: Tensor<T>) -> ParamId {
        assert!(!self.index.contains_key(&name), "duplicate parameter name `{name}`");
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry { name, kind, value });
        ParamId(id)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.kind == ParamKind::Trainable).map(|e| e.value.numel()).sum()
    }

    /// Bitwise equality of every stored value.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits())
            })
    }
}

/// Registers parameters under a dotted name prefix while drawing
/// initial values from a seeded generator.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, T: Scalar> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng) -> Self {
        ParamBuilder { store, rng, prefix: String::new() }
    }

    /// Builder for a nested scope `prefix.name`.
    pub fn sub(&mut self, name: &str) -> ParamBuilder<'_, T> {
        let prefix = self.path(name);
        ParamBuilder { store: &mut *self.store, rng: &mut *self.rng, prefix }
    }

    pub fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    /// He-normal initialisation, `N(0, 2 / fan_in)`.
    pub fn he_normal(&mut self, name: &str, shape: &[usize], fan_in: usize) -> ParamId {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        let rng = &mut *self.rng;
        let value = Tensor::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z * std)
        });
        let path = self.path(name);
        self.store.insert(path, ParamKind::Trainable, value)
    }

    /// Uniform initialisation on `[-bound, bound]`.
    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> ParamId {
        let rng = &mut *self.rng;
        let value = Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-bound..=bound)));
        let path = self.path(name);
        self.store.insert(path, ParamKind::Trainable, value)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64, kind: ParamKind) -> ParamId {
        let path = self.path(name);
        self.store.insert(path, kind, Tensor::full(shape, T::lit(value)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Running statistics, no parameter gradients.
    Eval,
    /// Batch statistics, parameters are differentiable leaves.
    Train,
}

/// Context of one forward pass over a [`ParamStore`].
///
/// Parameters become graph leaves lazily, once per session. Training-mode
/// layers report running-statistic updates here instead of mutating the
/// store, which stays shared and immutable during the pass.
pub struct Session<'a, T: Scalar> {
    store: &'a ParamStore<T>,
    mode: Mode,
    leaves: RefCell<HashMap<ParamId, Var<T>>>,
    updates: RefCell<Vec<(ParamId, Tensor<T>)>>,
    resample_rng: RefCell<Option<ChaCha8Rng>>,
}

impl<'a, T: Scalar> Session<'a, T> {
    pub fn new(store: &'a ParamStore<T>, mode: Mode) -> Self {
        Session {
            store,
            mode,
            leaves: RefCell::new(HashMap::new()),
            updates: RefCell::new(Vec::new()),
            resample_rng: RefCell::new(None),
        }
    }

    pub fn eval(store: &'a ParamStore<T>) -> Self {
        Self::new(store, Mode::Eval)
    }

    pub fn train(store: &'a ParamStore<T>) -> Self {
        Self::new(store, Mode::Train)
    }

    /// Supplies the generator used by blocks that redraw random features on
    /// every training forward.
    pub fn with_resample_rng(self, rng: ChaCha8Rng) -> Self {
        *self.resample_rng.borrow_mut() = Some(rng);
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_training(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn store(&self) -> &ParamStore<T> {
        self.store
    }

    /// Graph leaf for a stored tensor; trainable entries require gradients
    /// in training mode.
    pub fn param(&self, id: ParamId) -> Var<T> {
        if let Some(v) = self.leaves.borrow().get(&id) {
            return v.clone();
        }
        let entry = self.store.entry(id);
        let grad = self.is_training() && entry.kind == ParamKind::Trainable;
        let v = Var::leaf(entry.value.clone(), grad);
        self.leaves.borrow_mut().insert(id, v.clone());
        v
    }

    pub fn record_update(&self, id: ParamId, value: Tensor<T>) {
        self.updates.borrow_mut().push((id, value));
    }

    pub fn take_updates(&self) -> Vec<(ParamId, Tensor<T>)> {
        std::mem::take(&mut *self.updates.borrow_mut())
    }

    /// Runs `f` with the resampling generator if one was supplied.
    pub fn with_resample<R>(&self, f: impl FnOnce(Option<&mut ChaCha8Rng>) -> R) -> R {
        let mut guard = self.resample_rng.borrow_mut();
        f(guard.as_mut())
    }

    /// Collects per-parameter gradients in store order.
    pub fn gradients(&self, grads: &Grads<T>) -> Vec<Option<Tensor<T>>> {
        let leaves = self.leaves.borrow();
        self.store
            .ids()
            .map(|id| leaves.get(&id).and_then(|v| grads.get(v)).cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn builder_scopes_names_and_counts_trainables() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        {
            let mut enc = b.sub("enc");
            let mut conv = enc.sub("conv");
            conv.he_normal("weight", &[8, 1, 3, 3], 9);
            conv.constant("bias", &[8], 0.0, ParamKind::Trainable);
            conv.constant("running_mean", &[8], 0.0, ParamKind::Buffer);
        }
        assert!(store.find("enc.conv.weight").is_some());
        assert_eq!(store.trainable_count(), 80);
    }

    #[test]
    fn eval_session_params_carry_no_gradient() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("w".into(), ParamKind::Trainable, Tensor::ones(&[2]));
        assert!(!Session::eval(&store).param(id).requires_grad());
        assert!(Session::train(&store).param(id).requires_grad());
    }
}
