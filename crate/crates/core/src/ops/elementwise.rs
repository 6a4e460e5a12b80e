use crate::autograd::Var;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Lower and upper margin kept by [`Var::sigmoid`], so attention maps and
/// masks stay strictly inside (0, 1) even where `f32` would round to 0 or 1.
pub const SIGMOID_FLOOR: f64 = 1e-7;

/// Logistic function, computed without overflow for either sign.
#[inline]
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Var<T> {
    /// Element-wise map with derivative `deriv(x, y)` of input `x` and output `y`.
    pub(crate) fn unary<F, D>(&self, f: F, deriv: D) -> Var<T>
    where
        F: Fn(T) -> T,
        D: Fn(T, T) -> T + 'static,
    {
        let out = self.value().map(f);
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, p, y| {
                let x = p[0].data();
                let dx = g
                    .data()
                    .iter()
                    .zip(x)
                    .zip(y.data())
                    .map(|((&g, &x), &y)| g * deriv(x, y))
                    .collect();
                vec![Some(Tensor::new(g.shape(), dx).unwrap())]
            }),
        )
    }

    pub fn add(&self, other: &Var<T>) -> Var<T> {
        let out = self.value().zip_map(other.value(), |a, b| a + b);
        Var::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, _, _| vec![Some(g.clone()), Some(g.clone())]),
        )
    }

    pub fn sub(&self, other: &Var<T>) -> Var<T> {
        let out = self.value().zip_map(other.value(), |a, b| a - b);
        Var::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, _, _| vec![Some(g.clone()), Some(g.map(|x| -x))]),
        )
    }

    pub fn mul(&self, other: &Var<T>) -> Var<T> {
        let out = self.value().zip_map(other.value(), |a, b| a * b);
        Var::from_op(
            out,
            vec![self.clone(), other.clone()],
            Box::new(|g, p, _| {
                vec![
                    Some(g.zip_map(p[1], |g, b| g * b)),
                    Some(g.zip_map(p[0], |g, a| g * a)),
                ]
            }),
        )
    }

    pub fn scale(&self, c: T) -> Var<T> {
        self.unary(move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: T) -> Var<T> {
        self.unary(move |x| x + c, |_, _| T::one())
    }

    pub fn relu(&self) -> Var<T> {
        self.unary(
            // NaN passes through so divergence stays visible downstream.
            |x| if x > T::zero() || x.is_nan() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    /// Logistic sigmoid mapped onto `[ε, 1 − ε]` with ε = [`SIGMOID_FLOOR`].
    pub fn sigmoid(&self) -> Var<T> {
        let eps = T::lit(SIGMOID_FLOOR);
        let span = T::one() - eps - eps;
        self.unary(
            move |x| eps + span * logistic(x),
            move |x, _| {
                let s = logistic(x);
                span * s * (T::one() - s)
            },
        )
    }

    pub fn cos(&self) -> Var<T> {
        self.unary(|x| x.cos(), |x, _| -x.sin())
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&self) -> Var<T> {
        let out = Tensor::scalar(self.value().sum());
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(|g, p, _| vec![Some(Tensor::full(p[0].shape(), g.data()[0]))]),
        )
    }

    pub fn mean(&self) -> Var<T> {
        let n = T::from_usize(self.value().numel()).unwrap();
        self.sum().scale(T::one() / n)
    }

    /// Weighted sum `Σ w ⊙ x` against a constant weight tensor.
    pub fn dot_const(&self, w: &Tensor<T>) -> Var<T> {
        assert_eq!(w.shape(), self.shape(), "dot_const shape");
        let out = Tensor::scalar(self.value().data().iter().zip(w.data()).map(|(&a, &b)| a * b).sum());
        let w = w.clone();
        Var::from_op(
            out,
            vec![self.clone()],
            Box::new(move |g, _, _| {
                let s = g.data()[0];
                vec![Some(w.map(|x| x * s))]
            }),
        )
    }
}
