//! The assembled network: ReLU hidden stack, affine output map, and either
//! the reduced-solver head or a plain sigmoid head (comparison baselines).

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::DenseMatrix;
use crate::rng::SplitMix64;

use super::layer::{sigmoid, Activation, DenseLayer, LayerGrads};
use super::rb_layer::{RbOutputLayer, RbSampleCache};

#[derive(Debug, Clone)]
pub enum Head {
    /// Reduced-basis solver activation.
    Rb(RbOutputLayer),
    /// Component-wise sigmoid (baseline networks).
    Sigmoid,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub hidden: Vec<DenseLayer>,
    /// Final affine map; its width is the latent size s (or the head width
    /// for sigmoid baselines).
    pub output_affine: DenseLayer,
    pub head: Head,
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input to each trainable affine layer, hidden layers first.
    layer_inputs: Vec<DenseMatrix>,
    /// Pre-activations of each trainable layer; the last entry is z^(L).
    zs: Vec<DenseMatrix>,
    /// Head output, batch x n_out.
    pub y: DenseMatrix,
    /// Latent readout: rescaled coefficients (reduced head) or the sigmoid
    /// outputs (baseline head). Exposed but never fed to the loss.
    pub latents: DenseMatrix,
    rb_caches: Option<Vec<RbSampleCache>>,
    pub shifted_solves: usize,
}

impl ForwardPass {
    pub fn z_out(&self) -> &DenseMatrix {
        self.zs.last().expect("at least the output layer")
    }

    /// Reduced solution of sample i (reduced head only).
    pub fn reduced_solution(&self, i: usize) -> Option<&[f64]> {
        self.rb_caches.as_ref().map(|c| c[i].u_n())
    }

    /// ReLU activation signs per hidden layer, used for kink detection.
    pub fn relu_masks(&self) -> Vec<Vec<bool>> {
        self.zs[..self.zs.len() - 1]
            .iter()
            .map(|z| z.data().iter().map(|&v| v > 0.0).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Per-layer gradients, hidden layers first, output affine last.
    pub layers: Vec<LayerGrads>,
    /// Gradient with respect to the network input.
    pub d_input: DenseMatrix,
}

impl NetworkModel {
    pub fn new_rb(
        n_in: usize,
        hidden_sizes: &[usize],
        rb: RbOutputLayer,
        rng: &mut SplitMix64,
    ) -> Result<NetworkModel> {
        if hidden_sizes.is_empty() {
            return Err(Error::InvalidArgument {
                op: "NetworkModel::new_rb",
                detail: "need at least one hidden layer".into(),
            });
        }
        let s = rb.s();
        let (hidden, mut output_affine) = build_stack(n_in, hidden_sizes, s, rng);
        // Start the latent near zero: sigmoid(0) = 1/2 puts every sample's
        // first reduced solve at the center of the coefficient ranges, where
        // the system is well conditioned. A spread-out initial latent lands
        // on arbitrary coefficient combinations far from the solution
        // manifold and stalls training when many affine terms are in play.
        output_affine.weights.scale(0.05);
        Ok(NetworkModel {
            hidden,
            output_affine,
            head: Head::Rb(rb),
        })
    }

    pub fn new_sigmoid_head(
        n_in: usize,
        hidden_sizes: &[usize],
        head_size: usize,
        rng: &mut SplitMix64,
    ) -> Result<NetworkModel> {
        if hidden_sizes.is_empty() || head_size == 0 {
            return Err(Error::InvalidArgument {
                op: "NetworkModel::new_sigmoid_head",
                detail: "need hidden layers and a positive head size".into(),
            });
        }
        let (hidden, output_affine) = build_stack(n_in, hidden_sizes, head_size, rng);
        Ok(NetworkModel {
            hidden,
            output_affine,
            head: Head::Sigmoid,
        })
    }

    pub fn n_in(&self) -> usize {
        self.hidden[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        match &self.head {
            Head::Rb(rb) => rb.n_out(),
            Head::Sigmoid => self.output_affine.n_out(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.output_affine.n_out()
    }

    /// Hidden stack plus the final affine map: x -> z^(L), with caches.
    pub fn mlp_forward(
        &self,
        x: &DenseMatrix,
        exec: Exec,
    ) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>)> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                op: "mlp_forward",
                detail: "network input".into(),
            });
        }
        let mut layer_inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut zs = Vec::with_capacity(self.hidden.len() + 1);
        let mut current = x.clone();
        for (idx, layer) in self.hidden.iter().enumerate() {
            let (z, y) = layer.forward(&current, exec)?;
            if !z.is_finite() {
                return Err(Error::NonFinite {
                    op: "mlp_forward",
                    detail: format!("pre-activations of hidden layer {idx}"),
                });
            }
            layer_inputs.push(current);
            zs.push(z);
            current = y;
        }
        let (z_out, _) = self.output_affine.forward(&current, exec)?;
        if !z_out.is_finite() {
            return Err(Error::NonFinite {
                op: "mlp_forward",
                detail: "pre-activations of the output layer".into(),
            });
        }
        layer_inputs.push(current);
        zs.push(z_out);
        Ok((layer_inputs, zs))
    }

    pub fn forward(&self, x: &DenseMatrix, exec: Exec) -> Result<ForwardPass> {
        let (layer_inputs, zs) = self.mlp_forward(x, exec)?;
        let z_out = zs.last().expect("output layer present");
        let (y, latents, rb_caches, shifted) = match &self.head {
            Head::Rb(rb) => {
                let (y, latents, caches, shifted) = rb.forward_batch(z_out, exec)?;
                (y, latents, Some(caches), shifted)
            }
            Head::Sigmoid => {
                let mut y = z_out.clone();
                for v in y.data_mut() {
                    *v = sigmoid(*v);
                }
                (y.clone(), y, None, 0)
            }
        };
        Ok(ForwardPass {
            layer_inputs,
            zs,
            y,
            latents,
            rb_caches,
            shifted_solves: shifted,
        })
    }

    pub fn predict(&self, x: &DenseMatrix, exec: Exec) -> Result<(DenseMatrix, DenseMatrix)> {
        let pass = self.forward(x, exec)?;
        Ok((pass.y, pass.latents))
    }

    /// Backpropagates dL/dy through head, output affine map and hidden stack.
    pub fn backward(&self, pass: &ForwardPass, d_y: &DenseMatrix, exec: Exec) -> Result<Gradients> {
        // head backward -> gradient at z^(L)
        let d_z_out = match &self.head {
            Head::Rb(rb) => {
                let caches = pass.rb_caches.as_ref().ok_or(Error::InvalidArgument {
                    op: "NetworkModel::backward",
                    detail: "forward pass carries no reduced-solver caches".into(),
                })?;
                rb.backward_batch(caches, d_y, exec)?
            }
            Head::Sigmoid => {
                let mut d = d_y.clone();
                for (dv, zv) in d.data_mut().iter_mut().zip(pass.z_out().data().iter()) {
                    let s = sigmoid(*zv);
                    *dv *= s * (1.0 - s);
                }
                d
            }
        };
        let n_layers = self.hidden.len() + 1;
        let mut layer_grads: Vec<Option<LayerGrads>> = (0..n_layers).map(|_| None).collect();
        // output affine map (identity activation)
        let (mut d_below, g_out) = self.output_affine.backward(
            &pass.layer_inputs[n_layers - 1],
            &pass.zs[n_layers - 1],
            &d_z_out,
            exec,
        )?;
        layer_grads[n_layers - 1] = Some(g_out);
        for (idx, layer) in self.hidden.iter().enumerate().rev() {
            let (d_x, g) =
                layer.backward(&pass.layer_inputs[idx], &pass.zs[idx], &d_below, exec)?;
            layer_grads[idx] = Some(g);
            d_below = d_x;
        }
        Ok(Gradients {
            layers: layer_grads.into_iter().map(|g| g.unwrap()).collect(),
            d_input: d_below,
        })
    }

    /// Mutable parameter groups in a fixed order: (W, b) per hidden layer,
    /// then the output affine map. Matches `Gradients::flat`.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut groups: Vec<&mut [f64]> = Vec::with_capacity(2 * (self.hidden.len() + 1));
        for layer in self.hidden.iter_mut() {
            let DenseLayer {
                weights, biases, ..
            } = layer;
            groups.push(weights.data_mut());
            groups.push(biases.as_mut_slice());
        }
        let DenseLayer {
            weights, biases, ..
        } = &mut self.output_affine;
        groups.push(weights.data_mut());
        groups.push(biases.as_mut_slice());
        groups
    }

    pub fn param_count(&self) -> usize {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output_affine))
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }
}

impl Gradients {
    /// Gradient groups in the order of `param_groups_mut`.
    pub fn flat(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len());
        for g in &self.layers {
            out.push(g.d_weights.data());
            out.push(g.d_biases.as_slice());
        }
        out
    }
}

fn build_stack(
    n_in: usize,
    hidden_sizes: &[usize],
    out_size: usize,
    rng: &mut SplitMix64,
) -> (Vec<DenseLayer>, DenseLayer) {
    let mut hidden = Vec::with_capacity(hidden_sizes.len());
    let mut width = n_in;
    for &h in hidden_sizes {
        hidden.push(DenseLayer::new_random(width, h, Activation::Relu, rng));
        width = h;
    }
    let output_affine = DenseLayer::new_random(width, out_size, Activation::Identity, rng);
    (hidden, output_affine)
}
