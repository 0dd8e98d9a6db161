//! Tanh multi-layer perceptrons over flat parameter vectors.
//!
//! Parameters live in a single `Vec<f64>` in layer-major order: for each
//! layer, weights row-major `(out x in)`, then biases. Hidden layers apply
//! tanh, the output layer is affine. All arithmetic is f64; gradient checks
//! at 1e-5 relative tolerance are not attainable in f32.

use rand::Rng;

use crate::error::{Error, Result};

/// Hidden widths used by every network in the pipeline unless overridden.
pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];

/// Flat, deterministically ordered parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.0 {
            *x *= s;
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ParamVector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }

    /// `self + a * x` without mutating `self`.
    pub fn added(&self, a: f64, x: &ParamVector) -> ParamVector {
        let mut out = self.clone();
        out.axpy(a, x);
        out
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Architecture of a tanh MLP. Hidden activation is fixed to tanh; the
/// output layer is affine, consumers apply their own transforms.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::shape("all MLP dimensions must be >= 1"));
        }
        Ok(MlpSpec { input_dim, hidden_dims, output_dim })
    }

    /// Standard two-hidden-layer network used throughout the pipeline.
    pub fn with_default_hidden(input_dim: usize, output_dim: usize) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims: DEFAULT_HIDDEN.to_vec(),
            output_dim,
        }
    }

    /// `(in, out)` shape of every affine layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            shapes.push((prev, h));
            prev = h;
        }
        shapes.push((prev, self.output_dim));
        shapes
    }

    /// Total parameter count: sum over layers of `(in + 1) * out`.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }

    /// Weights uniform in ±sqrt(6/(fan_in+fan_out)), biases zero.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layer_shapes() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                values.push(rng.gen_range(-limit..limit));
            }
            values.extend(std::iter::repeat(0.0).take(fan_out));
        }
        ParamVector(values)
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "parameter vector length {} does not match spec parameter count {}",
                params.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::shape(format!(
                "input length {} does not match input_dim {}",
                input.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass. Hidden layers apply tanh, output layer is affine.
    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_input(input)?;
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        let mut h = input.to_vec();
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = &params.0[offset..offset + fan_in * fan_out];
            let b = &params.0[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            offset += (fan_in + 1) * fan_out;
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut sum = b[o];
                for (wi, hi) in row.iter().zip(&h) {
                    sum += wi * hi;
                }
                z[o] = if l == last { sum } else { sum.tanh() };
            }
            h = z;
        }
        Ok(h)
    }

    /// Forward pass keeping post-activation values of every layer
    /// (`trace[0]` is the input, `trace[last]` the network output). The
    /// trace feeds the cached backward/JVP paths so repeated gradient work
    /// against fixed parameters pays for the forward pass once.
    pub(crate) fn forward_trace(&self, params: &ParamVector, input: &[f64]) -> Vec<Vec<f64>> {
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        let mut trace = Vec::with_capacity(shapes.len() + 1);
        trace.push(input.to_vec());
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = &params.0[offset..offset + fan_in * fan_out];
            let b = &params.0[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            offset += (fan_in + 1) * fan_out;
            let h = trace.last().unwrap();
            let mut z = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let mut sum = b[o];
                for (wi, hi) in row.iter().zip(h) {
                    sum += wi * hi;
                }
                z[o] = if l == last { sum } else { sum.tanh() };
            }
            trace.push(z);
        }
        trace
    }

    /// Gradient of `output_grad . output` with respect to the parameters.
    pub fn backward(
        &self,
        params: &ParamVector,
        input: &[f64],
        output_grad: &[f64],
    ) -> Result<ParamVector> {
        let mut grad = ParamVector::zeros(self.param_count());
        self.backward_into(params, input, output_grad, 1.0, grad.as_mut_slice())?;
        Ok(grad)
    }

    /// Adds `scale * d(output_grad . output)/d(params)` into `grad_acc`.
    ///
    /// Accumulating form used by batch reductions; avoids one allocation per
    /// sample beyond the activation trace.
    pub fn backward_into(
        &self,
        params: &ParamVector,
        input: &[f64],
        output_grad: &[f64],
        scale: f64,
        grad_acc: &mut [f64],
    ) -> Result<()> {
        self.check_params(params)?;
        self.check_input(input)?;
        if output_grad.len() != self.output_dim {
            return Err(Error::shape(format!(
                "output_grad length {} does not match output_dim {}",
                output_grad.len(),
                self.output_dim
            )));
        }
        if grad_acc.len() != self.param_count() {
            return Err(Error::shape("gradient accumulator length mismatch"));
        }
        let trace = self.forward_trace(params, input);
        self.backward_from_trace(params, &trace, output_grad, scale, grad_acc);
        Ok(())
    }

    /// Backward pass reusing a previously computed activation trace.
    pub(crate) fn backward_from_trace(
        &self,
        params: &ParamVector,
        trace: &[Vec<f64>],
        output_grad: &[f64],
        scale: f64,
        grad_acc: &mut [f64],
    ) {
        let shapes = self.layer_shapes();
        debug_assert_eq!(trace.len(), shapes.len() + 1);

        // Per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for &(fan_in, fan_out) in &shapes {
            offsets.push(off);
            off += (fan_in + 1) * fan_out;
        }

        // delta = d(objective)/d(pre-activation) of the current layer.
        let mut delta = output_grad.to_vec();
        for l in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[l];
            let w = &params.0[offsets[l]..offsets[l] + fan_in * fan_out];
            let layer_in = &trace[l];
            {
                let gw = &mut grad_acc[offsets[l]..offsets[l] + fan_in * fan_out];
                for o in 0..fan_out {
                    let d = scale * delta[o];
                    let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                    for (g, x) in row.iter_mut().zip(layer_in) {
                        *g += d * x;
                    }
                }
            }
            let gb = &mut grad_acc
                [offsets[l] + fan_in * fan_out..offsets[l] + (fan_in + 1) * fan_out];
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += scale * d;
            }

            if l > 0 {
                // Propagate to the previous layer's post-activation, then
                // through its tanh.
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                for (p, y) in prev.iter_mut().zip(&trace[l]) {
                    *p *= 1.0 - y * y;
                }
                delta = prev;
            }
        }
    }

    /// Directional derivative of the output with respect to the parameters:
    /// `J(params) . tangent` evaluated at `input`.
    pub fn param_jvp(
        &self,
        params: &ParamVector,
        input: &[f64],
        tangent: &ParamVector,
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.check_input(input)?;
        if tangent.len() != self.param_count() {
            return Err(Error::shape("tangent length mismatch"));
        }
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        let mut h = input.to_vec();
        let mut dh = vec![0.0; h.len()];
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = &params.0[offset..offset + fan_in * fan_out];
            let b = &params.0[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let dw = &tangent.0[offset..offset + fan_in * fan_out];
            let db = &tangent.0[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            offset += (fan_in + 1) * fan_out;

            let mut z = vec![0.0; fan_out];
            let mut dz = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let drow = &dw[o * fan_in..(o + 1) * fan_in];
                let mut sum = b[o];
                let mut dsum = db[o];
                for i in 0..fan_in {
                    sum = row[i].mul_add(h[i], sum);
                    dsum += drow[i] * h[i] + row[i] * dh[i];
                }
                if l == last {
                    z[o] = sum;
                    dz[o] = dsum;
                } else {
                    let y = sum.tanh();
                    z[o] = y;
                    dz[o] = (1.0 - y * y) * dsum;
                }
            }
            h = z;
            dh = dz;
        }
        Ok(dh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn param_count_matches_layout() {
        let spec = MlpSpec::new(4, vec![8, 8], 2).unwrap();
        assert_eq!(spec.param_count(), (4 + 1) * 8 + (8 + 1) * 8 + (8 + 1) * 2);
        let spec = MlpSpec::with_default_hidden(4, 2);
        assert_eq!(spec.param_count(), 5 * 100 + 101 * 100 + 101 * 2);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(MlpSpec::new(0, vec![3], 1).is_err());
        assert!(MlpSpec::new(2, vec![0], 1).is_err());
        assert!(MlpSpec::new(2, vec![3], 0).is_err());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, vec![5], 2).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        let out = spec.forward(&params, &[0.3, -1.0, 2.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        // Single affine layer (no hidden), identity weights, zero bias.
        let spec = MlpSpec::new(3, vec![], 3).unwrap();
        let mut params = ParamVector::zeros(spec.param_count());
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let x = [0.5, -2.0, 7.25];
        let out = spec.forward(&params, &x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn ones_net_hand_evaluation() {
        // 1-1-1 net, all weights and biases 1, input 0:
        // hidden = tanh(1*0 + 1), output = 1*tanh(1) + 1.
        let spec = MlpSpec::new(1, vec![1], 1).unwrap();
        let params = ParamVector::from_vec(vec![1.0; spec.param_count()]);
        let out = spec.forward(&params, &[0.0]).unwrap();
        let expected = 1.0_f64.tanh() + 1.0;
        assert!((out[0] - expected).abs() < 1e-12);
        assert!((out[0] - 1.76159).abs() < 1e-5);
    }

    #[test]
    fn forward_shape_errors() {
        let spec = MlpSpec::new(3, vec![4], 2).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert!(matches!(spec.forward(&params, &[1.0, 2.0]), Err(crate::Error::Shape(_))));
        let bad = ParamVector::zeros(spec.param_count() + 1);
        assert!(matches!(spec.forward(&bad, &[1.0, 2.0, 3.0]), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradient() {
        let spec = MlpSpec::new(2, vec![3], 2).unwrap();
        let mut r = rng(0);
        let params = spec.init_params(&mut r);
        let grad = spec.backward(&params, &[0.4, -0.2], &[0.0, 0.0]).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_layer_gradient_closed_form() {
        // Single affine layer, output_grad = 1: weight grads = input, bias grad = 1.
        let spec = MlpSpec::new(3, vec![], 1).unwrap();
        let mut r = rng(1);
        let params = spec.init_params(&mut r);
        let x = [0.7, -1.3, 2.0];
        let grad = spec.backward(&params, &x, &[1.0]).unwrap();
        assert_eq!(&grad.as_slice()[..3], &x);
        assert_eq!(grad[3], 1.0);
    }

    /// Central finite differences of `output_grad . forward(params)`.
    fn fd_gradient(spec: &MlpSpec, params: &ParamVector, x: &[f64], og: &[f64]) -> Vec<f64> {
        let step = 1e-6;
        let mut g = Vec::with_capacity(params.len());
        let mut p = params.clone();
        for k in 0..params.len() {
            let orig = p[k];
            p[k] = orig + step;
            let plus: f64 = spec
                .forward(&p, x)
                .unwrap()
                .iter()
                .zip(og)
                .map(|(o, w)| o * w)
                .sum();
            p[k] = orig - step;
            let minus: f64 = spec
                .forward(&p, x)
                .unwrap()
                .iter()
                .zip(og)
                .map(|(o, w)| o * w)
                .sum();
            p[k] = orig;
            g.push((plus - minus) / (2.0 * step));
        }
        g
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spec = MlpSpec::new(4, vec![8], 2).unwrap();
        let mut r = rng(2);
        let params = spec.init_params(&mut r);
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let og: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
        let grad = spec.backward(&params, &x, &og).unwrap();
        let fd = fd_gradient(&spec, &params, &x, &og);
        for (a, n) in grad.iter().zip(&fd) {
            assert!(rel_err(*a, *n) <= 1e-5, "analytic {a} vs fd {n}");
        }
    }

    #[test]
    fn backward_fd_sweep_small_specs() {
        // Random architectures with dims <= 16: >= 99% of components within
        // 1e-5 relative error, none beyond 1e-4.
        let mut r = rng(3);
        let mut total = 0usize;
        let mut loose = 0usize;
        for trial in 0..20 {
            let input_dim = r.gen_range(1..=6);
            let output_dim = r.gen_range(1..=4);
            let depth = r.gen_range(0..=2);
            let hidden: Vec<usize> = (0..depth).map(|_| r.gen_range(1..=16)).collect();
            let spec = MlpSpec::new(input_dim, hidden, output_dim).unwrap();
            let params = spec.init_params(&mut r);
            let x: Vec<f64> = (0..input_dim).map(|_| r.gen_range(-1.5..1.5)).collect();
            let og: Vec<f64> = (0..output_dim).map(|_| r.gen_range(-1.0..1.0)).collect();
            let grad = spec.backward(&params, &x, &og).unwrap();
            let fd = fd_gradient(&spec, &params, &x, &og);
            for (a, n) in grad.iter().zip(&fd) {
                let e = rel_err(*a, *n);
                total += 1;
                if e > 1e-5 {
                    loose += 1;
                }
                assert!(e <= 1e-4, "trial {trial}: rel err {e} (analytic {a}, fd {n})");
            }
        }
        assert!(loose as f64 <= 0.01 * total as f64, "{loose}/{total} beyond 1e-5");
    }

    #[test]
    fn jvp_matches_forward_difference() {
        let spec = MlpSpec::new(3, vec![7, 5], 2).unwrap();
        let mut r = rng(4);
        let params = spec.init_params(&mut r);
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut tangent = ParamVector::zeros(spec.param_count());
        for t in tangent.as_mut_slice() {
            *t = r.gen_range(-1.0..1.0);
        }
        let jvp = spec.param_jvp(&params, &x, &tangent).unwrap();
        let step = 1e-6;
        let plus = spec.forward(&params.added(step, &tangent), &x).unwrap();
        let minus = spec.forward(&params.added(-step, &tangent), &x).unwrap();
        for (j, (p, m)) in jvp.iter().zip(plus.iter().zip(&minus)) {
            let fd = (p - m) / (2.0 * step);
            assert!(rel_err(*j, fd) <= 1e-5, "jvp {j} vs fd {fd}");
        }
    }

    #[test]
    fn jvp_consistent_with_backward() {
        // For any tangent v and output weight w: w . (J v) == (J^T w) . v.
        let spec = MlpSpec::new(4, vec![6], 3).unwrap();
        let mut r = rng(5);
        let params = spec.init_params(&mut r);
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let og: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut tangent = ParamVector::zeros(spec.param_count());
        for t in tangent.as_mut_slice() {
            *t = r.gen_range(-1.0..1.0);
        }
        let jvp = spec.param_jvp(&params, &x, &tangent).unwrap();
        let lhs: f64 = jvp.iter().zip(&og).map(|(a, b)| a * b).sum();
        let vjp = spec.backward(&params, &x, &og).unwrap();
        let rhs = vjp.dot(&tangent);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn perturbation_probe_matches_gradient_component() {
        // Perturb one parameter, forward difference matches the backward
        // gradient component.
        let spec = MlpSpec::new(2, vec![4], 1).unwrap();
        let mut r = rng(6);
        let params = spec.init_params(&mut r);
        let x = [0.3, -0.9];
        let grad = spec.backward(&params, &x, &[1.0]).unwrap();
        let k = 5;
        let delta = 1e-6;
        let mut p = params.clone();
        p[k] += delta;
        let plus = spec.forward(&p, &x).unwrap()[0];
        p[k] -= 2.0 * delta;
        let minus = spec.forward(&p, &x).unwrap()[0];
        let fd = (plus - minus) / (2.0 * delta);
        assert!(rel_err(grad[k], fd) <= 1e-5);
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let spec = MlpSpec::new(5, vec![8, 8], 3).unwrap();
        let a = spec.init_params(&mut rng(7));
        let b = spec.init_params(&mut rng(7));
        assert_eq!(a, b);
        // Bias block of the first layer is zero.
        let first_bias = &a.as_slice()[5 * 8..5 * 8 + 8];
        assert!(first_bias.iter().all(|&x| x == 0.0));
        let limit = (6.0_f64 / (5.0 + 8.0)).sqrt();
        assert!(a.as_slice()[..40].iter().all(|w| w.abs() < limit));
    }
}
