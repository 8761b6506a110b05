//! Fully connected layers with batched forward/backward passes.
//!
//! Batches are stored row-wise (samples x features) in column-major matrices,
//! so a feature column is contiguous across the batch and the per-neuron
//! loops vectorize over samples.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, Exec};
use crate::numerics::{dot, DenseMatrix};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation z.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// n_out x n_in.
    pub weights: DenseMatrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: DenseMatrix,
    pub d_biases: Vec<f64>,
}

impl DenseLayer {
    /// He-uniform fan-in scaling for ReLU layers, Xavier-uniform otherwise.
    pub fn new_random(
        n_in: usize,
        n_out: usize,
        activation: Activation,
        rng: &mut SplitMix64,
    ) -> DenseLayer {
        let limit = match activation {
            Activation::Relu => (6.0 / n_in as f64).sqrt(),
            _ => (6.0 / (n_in + n_out) as f64).sqrt(),
        };
        let mut weights = DenseMatrix::zeros(n_out, n_in);
        // column-major fill keeps the draw order deterministic
        for j in 0..n_in {
            for i in 0..n_out {
                weights.set(i, j, rng.uniform(-limit, limit));
            }
        }
        DenseLayer {
            weights,
            biases: vec![0.0; n_out],
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }

    /// Returns (pre-activations z, outputs y), both batch x n_out.
    pub fn forward(&self, x: &DenseMatrix, exec: Exec) -> Result<(DenseMatrix, DenseMatrix)> {
        if x.cols() != self.n_in() {
            return Err(Error::Dimension {
                op: "DenseLayer::forward",
                detail: format!("input width {} != {}", x.cols(), self.n_in()),
            });
        }
        let n_b = x.rows();
        let mut z = DenseMatrix::zeros(n_b, self.n_out());
        for_each_chunk_mut(exec, z.data_mut(), n_b, |o, z_col| {
            z_col.iter_mut().for_each(|v| *v = self.biases[o]);
            for j in 0..self.n_in() {
                let w = self.weights.get(o, j);
                if w != 0.0 {
                    let xj = x.col(j);
                    for (zv, xv) in z_col.iter_mut().zip(xj.iter()) {
                        *zv += w * xv;
                    }
                }
            }
        });
        let mut y = z.clone();
        for v in y.data_mut() {
            *v = self.activation.apply(*v);
        }
        Ok((z, y))
    }

    /// Backward pass: given the layer input x, cached pre-activations z and
    /// the upstream gradient dL/dy, returns dL/dx and the parameter grads.
    pub fn backward(
        &self,
        x: &DenseMatrix,
        z: &DenseMatrix,
        d_out: &DenseMatrix,
        exec: Exec,
    ) -> Result<(DenseMatrix, LayerGrads)> {
        let n_b = x.rows();
        if d_out.rows() != n_b || d_out.cols() != self.n_out() || z.cols() != self.n_out() {
            return Err(Error::Dimension {
                op: "DenseLayer::backward",
                detail: "gradient shape does not match the forward pass".into(),
            });
        }
        // dz = d_out (.) act'(z)
        let mut dz = d_out.clone();
        for (dv, zv) in dz.data_mut().iter_mut().zip(z.data().iter()) {
            *dv *= self.activation.derivative(*zv);
        }
        // dx = dz W
        let mut dx = DenseMatrix::zeros(n_b, self.n_in());
        for_each_chunk_mut(exec, dx.data_mut(), n_b, |j, dx_col| {
            for o in 0..self.n_out() {
                let w = self.weights.get(o, j);
                if w != 0.0 {
                    let dz_col = dz.col(o);
                    for (dv, dzv) in dx_col.iter_mut().zip(dz_col.iter()) {
                        *dv += w * dzv;
                    }
                }
            }
        });
        // dW[o, j] = dot(dz_col_o, x_col_j); db[o] = sum(dz_col_o)
        let mut d_weights = DenseMatrix::zeros(self.n_out(), self.n_in());
        let n_out = self.n_out();
        for_each_chunk_mut(exec, d_weights.data_mut(), n_out, |j, dw_col| {
            let xj = x.col(j);
            for (o, dv) in dw_col.iter_mut().enumerate() {
                *dv = dot(dz.col(o), xj);
            }
        });
        let d_biases: Vec<f64> = (0..self.n_out()).map(|o| dz.col(o).iter().sum()).collect();
        Ok((
            dx,
            LayerGrads {
                d_weights,
                d_biases,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer_from(weights: DenseMatrix, biases: Vec<f64>, activation: Activation) -> DenseLayer {
        DenseLayer {
            weights,
            biases,
            activation,
        }
    }

    #[test]
    fn zero_parameters_give_zero_preactivation() {
        let l = layer_from(DenseMatrix::zeros(3, 2), vec![0.0; 3], Activation::Relu);
        let x = DenseMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let (z, y) = l.forward(&x, Exec::Serial).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let l = layer_from(DenseMatrix::identity(4), vec![0.0; 4], Activation::Identity);
        let x = DenseMatrix::from_fn(3, 4, |i, j| (10 * i + j) as f64);
        let (_, y) = l.forward(&x, Exec::Serial).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn forward_matches_per_sample_loop_oracle() {
        let mut rng = SplitMix64::new(41);
        let l = DenseLayer::new_random(4, 3, Activation::Relu, &mut rng);
        let l2 = DenseLayer::new_random(3, 2, Activation::Sigmoid, &mut rng);
        let x = DenseMatrix::from_fn(6, 4, |_, _| rng.uniform(-1.0, 1.0));
        let (_, h) = l.forward(&x, Exec::Serial).unwrap();
        let (_, out) = l2.forward(&h, Exec::Serial).unwrap();
        // hand-rolled per-sample evaluation
        for s in 0..6 {
            let xs = x.row(s);
            let mut hs = vec![0.0; 3];
            for o in 0..3 {
                let mut acc = l.biases[o];
                for j in 0..4 {
                    acc += l.weights.get(o, j) * xs[j];
                }
                hs[o] = acc.max(0.0);
            }
            for o in 0..2 {
                let mut acc = l2.biases[o];
                for j in 0..3 {
                    acc += l2.weights.get(o, j) * hs[j];
                }
                let want = sigmoid(acc);
                assert!((out.get(s, o) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = SplitMix64::new(42);
        let mut l = DenseLayer::new_random(3, 2, Activation::Sigmoid, &mut rng);
        let x = DenseMatrix::from_fn(4, 3, |_, _| rng.uniform(-1.0, 1.0));
        let w_probe = DenseMatrix::from_fn(4, 2, |_, _| rng.uniform(-1.0, 1.0));
        let loss = |layer: &DenseLayer| -> f64 {
            let (_, y) = layer.forward(&x, Exec::Serial).unwrap();
            dot(y.data(), w_probe.data())
        };
        let (z, _) = l.forward(&x, Exec::Serial).unwrap();
        let (dx, grads) = l.backward(&x, &z, &w_probe, Exec::Serial).unwrap();
        let h = 1e-6;
        for idx in 0..l.weights.data().len() {
            let orig = l.weights.data()[idx];
            l.weights.data_mut()[idx] = orig + h;
            let lp = loss(&l);
            l.weights.data_mut()[idx] = orig - h;
            let lm = loss(&l);
            l.weights.data_mut()[idx] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grads.d_weights.data()[idx]).abs() < 1e-7);
        }
        for o in 0..2 {
            let orig = l.biases[o];
            l.biases[o] = orig + h;
            let lp = loss(&l);
            l.biases[o] = orig - h;
            let lm = loss(&l);
            l.biases[o] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grads.d_biases[o]).abs() < 1e-7);
        }
        // input gradient via a perturbed copy of x
        let mut xp = x.clone();
        for idx in 0..x.data().len() {
            let orig = x.data()[idx];
            xp.data_mut()[idx] = orig + h;
            let (_, yp) = l.forward(&xp, Exec::Serial).unwrap();
            let lp = dot(yp.data(), w_probe.data());
            xp.data_mut()[idx] = orig - h;
            let (_, ym) = l.forward(&xp, Exec::Serial).unwrap();
            let lm = dot(ym.data(), w_probe.data());
            xp.data_mut()[idx] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - dx.data()[idx]).abs() < 1e-7);
        }
    }

    #[test]
    fn serial_and_parallel_passes_are_bitwise_equal() {
        let mut rng = SplitMix64::new(43);
        let l = DenseLayer::new_random(20, 15, Activation::Relu, &mut rng);
        let x = DenseMatrix::from_fn(32, 20, |_, _| rng.uniform(-1.0, 1.0));
        let (zs, ys) = l.forward(&x, Exec::Serial).unwrap();
        let (zp, yp) = l.forward(&x, Exec::Parallel).unwrap();
        assert_eq!(zs.data(), zp.data());
        assert_eq!(ys.data(), yp.data());
        let up = DenseMatrix::from_fn(32, 15, |_, _| rng.uniform(-1.0, 1.0));
        let (dxs, gs) = l.backward(&x, &zs, &up, Exec::Serial).unwrap();
        let (dxp, gp) = l.backward(&x, &zp, &up, Exec::Parallel).unwrap();
        assert_eq!(dxs.data(), dxp.data());
        assert_eq!(gs.d_weights.data(), gp.d_weights.data());
        assert_eq!(gs.d_biases, gp.d_biases);
    }
}
