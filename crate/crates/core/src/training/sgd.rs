use crate::neural::{NetworkParams, Scalar};

/// Classic momentum update: `v <- mu v - lr g`, `w <- w + v`.
pub fn sgd_step<T: Scalar>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    velocity: &mut NetworkParams<T>,
    learning_rate: f64,
    momentum: f64,
) {
    let lr = T::from_f64(learning_rate);
    let mu = T::from_f64(momentum);
    velocity.zip_mut(grads, |v, g| *v = mu * *v - lr * g);
    params.zip_mut(velocity, |w, v| *w += v);
}
