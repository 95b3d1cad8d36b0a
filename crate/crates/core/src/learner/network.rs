use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::LearnerError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    /// `(out, in)`
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

/// Feedforward action-value network: rectified hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    pub(crate) layers: Vec<Dense>,
}

/// Per-layer `(dW, db)`, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients(pub Vec<(Array2<f64>, Array1<f64>)>);

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.0
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }
}

impl QNetwork {
    /// Layer widths `[input, hidden.., output]`; weights and biases drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self, LearnerError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(LearnerError::Shape(format!("invalid layer widths {widths:?}")));
        }
        let layers = widths
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..bound));
                let b = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-bound..bound));
                Dense { w, b }
            })
            .collect();
        Ok(QNetwork { layers })
    }

    pub(crate) fn from_layers(layers: Vec<Dense>) -> Result<Self, LearnerError> {
        if layers.is_empty() {
            return Err(LearnerError::Shape("network without layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].w.nrows() != pair[1].w.ncols() {
                return Err(LearnerError::Shape("consecutive layers do not chain".into()));
            }
        }
        for l in &layers {
            if l.b.len() != l.w.nrows() {
                return Err(LearnerError::Shape("bias length differs from layer width".into()));
            }
        }
        Ok(QNetwork { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    /// `[input, hidden.., output]`
    pub fn widths(&self) -> Vec<usize> {
        let mut out = vec![self.input_dim()];
        out.extend(self.layers.iter().map(|l| l.w.nrows()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameter `index` in the order used by [`Gradients::flatten`].
    pub fn param(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            if index < l.w.len() {
                return l.w.as_slice().expect("standard layout")[index];
            }
            index -= l.w.len();
            if index < l.b.len() {
                return l.b[index];
            }
            index -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for l in &mut self.layers {
            if index < l.w.len() {
                l.w.as_slice_mut().expect("standard layout")[index] = value;
                return;
            }
            index -= l.w.len();
            if index < l.b.len() {
                l.b[index] = value;
                return;
            }
            index -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|x| x.is_finite()))
    }

    /// `(batch, input) -> (batch, output)`
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.w.t());
            z += &l.b;
            if i != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        a
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        self.forward(&x).into_raw_vec_and_offset().0
    }

    /// Mean smooth-L1 loss between `Q(x_i, a_i)` and `y_i` and its gradient.
    pub fn loss_and_grad(&self, x: &Array2<f64>, actions: &[usize], targets: &[f64], beta: f64) -> (f64, Gradients) {
        let batch = x.nrows();
        debug_assert_eq!(actions.len(), batch);
        debug_assert_eq!(targets.len(), batch);
        // Forward, keeping every layer's input.
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = a.dot(&l.w.t());
            z += &l.b;
            if i != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(a);
            a = z;
        }
        let q = a;

        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros(q.raw_dim());
        for (i, (&act, &y)) in actions.iter().zip(targets).enumerate() {
            let d = q[[i, act]] - y;
            let (l, g) = smooth_l1(d, beta);
            loss += l;
            delta[[i, act]] = g / batch as f64;
        }
        loss /= batch as f64;

        let mut grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let input = &inputs[i];
            let dw = delta.t().dot(input);
            let db = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut next = delta.dot(&self.layers[i].w);
                // `input` is the post-activation of layer i-1.
                next.zip_mut_with(input, |g, &act| {
                    if act <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = next;
            }
            grads[i] = (dw, db);
        }
        (loss, Gradients(grads))
    }
}

/// Smooth-L1 value and derivative at residual `d`.
pub fn smooth_l1(d: f64, beta: f64) -> (f64, f64) {
    if d.abs() < beta {
        (0.5 * d * d / beta, d / beta)
    } else {
        (d.abs() - 0.5 * beta, d.signum())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl AdamW {
    pub fn new(net: &QNetwork, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<_> = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect();
        AdamW { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (lr, wd, eps) = (self.lr, self.weight_decay, self.eps);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * wd * *p;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in
            net.layers.iter_mut().zip(&grads.0).zip(&mut self.m).zip(&mut self.v)
        {
            ndarray::Zip::from(&mut layer.w).and(gw).and(mw).and(vw).for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b).and(gb).and(mb).and(vb).for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// `target <- tau * policy + (1 - tau) * target`, parameter-wise.
pub fn soft_update(target: &mut QNetwork, policy: &QNetwork, tau: f64) -> Result<(), LearnerError> {
    if target.widths() != policy.widths() {
        return Err(LearnerError::Shape(format!(
            "soft update between {:?} and {:?}",
            target.widths(),
            policy.widths()
        )));
    }
    for (t, p) in target.layers.iter_mut().zip(&policy.layers) {
        t.w.zip_mut_with(&p.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        t.b.zip_mut_with(&p.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
    }
    Ok(())
}

/// Euclidean distance between the parameter vectors of two congruent networks.
pub fn parameter_distance(a: &QNetwork, b: &QNetwork) -> f64 {
    a.layers
        .iter()
        .zip(&b.layers)
        .map(|(x, y)| {
            let dw: f64 = x.w.iter().zip(y.w.iter()).map(|(p, q)| (p - q).powi(2)).sum();
            let db: f64 = x.b.iter().zip(y.b.iter()).map(|(p, q)| (p - q).powi(2)).sum();
            dw + db
        })
        .sum::<f64>()
        .sqrt()
}
