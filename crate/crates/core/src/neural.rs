//! One-hidden-layer value network used by both agents.
//!
//! The input is a one-hot index (a number for the sender, a word for the
//! listener) and each output head estimates the expected reward of one
//! action. Dropout masks drawn per decision give the Thompson-sampled model
//! the agent acts on; the same mask is replayed when the decision is
//! regressed onto its reward.
//!
//! All parameters live in one flat vector laid out as
//! `[w1 | b1 | w2 | b2]`, with `w1` stored input-major so that the hidden
//! pre-activation for a one-hot input is a contiguous slice.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    #[default]
    Glorot,
    /// Every parameter zero.
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T = f64> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        Self { lr: T::lit(1e-3), beta1: T::lit(0.9), beta2: T::lit(0.999), eps: T::lit(1e-8) }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f64> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { m: vec![T::zero(); len], v: vec![T::zero(); len], step: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, cfg: &AdamConfig<T>) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::Shape { expected: params.len(), got: grads.len() });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Shape { expected: params.len(), got: state.m.len().min(state.v.len()) });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = T::one() - cfg.beta1.powi(t);
    let c2 = T::one() - cfg.beta2.powi(t);
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Which hidden units survive in one sampled sub-network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DropoutMask {
    keep: Vec<bool>,
}

impl DropoutMask {
    pub fn ones(len: usize) -> Self {
        Self { keep: vec![true; len] }
    }

    pub fn from_bits(keep: Vec<bool>) -> Self {
        Self { keep }
    }

    pub fn bits(&self) -> &[bool] {
        &self.keep
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Draw i.i.d. Bernoulli(`keep_prob`) keep flags.
pub fn sample_mask<R: Rng + ?Sized>(len: usize, keep_prob: f64, rng: &mut R) -> DropoutMask {
    debug_assert!(keep_prob > 0.0 && keep_prob <= 1.0);
    DropoutMask { keep: (0..len).map(|_| rng.random::<f64>() < keep_prob).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig<T = f64> {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// Probability that a hidden unit is kept (1 − dropout rate).
    pub keep_prob: T,
    pub adam: AdamConfig<T>,
    pub init: Init,
}

impl<T: Real> NetConfig<T> {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, hidden: 50, outputs, keep_prob: T::lit(0.7), adam: AdamConfig::default(), init: Init::Glorot }
    }
}

/// One training example: the state that was observed, the action taken, the
/// reward received, and the mask that was active when the action was chosen.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T = f64> {
    pub input: usize,
    pub action: usize,
    pub target: T,
    pub mask: Option<&'a DropoutMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentNet<T = f64> {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    keep_prob: T,
    adam_cfg: AdamConfig<T>,
    params: Vec<T>,
    adam: AdamState<T>,
}

impl<T: Real> AgentNet<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig<T>, rng: &mut R) -> Result<Self> {
        if cfg.inputs == 0 || cfg.hidden == 0 || cfg.outputs == 0 {
            return Err(Error::Domain("network dimensions must be positive".into()));
        }
        if !(cfg.keep_prob > T::zero() && cfg.keep_prob <= T::one()) {
            return Err(Error::Domain(format!("keep probability {} not in (0, 1]", cfg.keep_prob)));
        }
        let len = Self::param_len(cfg.inputs, cfg.hidden, cfg.outputs);
        let mut net = Self {
            inputs: cfg.inputs,
            hidden: cfg.hidden,
            outputs: cfg.outputs,
            keep_prob: cfg.keep_prob,
            adam_cfg: cfg.adam,
            params: vec![T::zero(); len],
            adam: AdamState::new(len),
        };
        if cfg.init == Init::Glorot {
            let b1 = (6.0 / (cfg.inputs + cfg.hidden) as f64).sqrt();
            let b2 = (6.0 / (cfg.hidden + cfg.outputs) as f64).sqrt();
            let (w1, rest) = net.params.split_at_mut(cfg.inputs * cfg.hidden);
            for w in w1.iter_mut() {
                *w = T::lit(rng.random_range(-b1..b1));
            }
            let w2 = &mut rest[cfg.hidden..cfg.hidden + cfg.outputs * cfg.hidden];
            for w in w2.iter_mut() {
                *w = T::lit(rng.random_range(-b2..b2));
            }
        }
        Ok(net)
    }

    fn param_len(inputs: usize, hidden: usize, outputs: usize) -> usize {
        inputs * hidden + hidden + outputs * hidden + outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn keep_prob(&self) -> T {
        self.keep_prob
    }

    pub fn adam_config(&self) -> &AdamConfig<T> {
        &self.adam_cfg
    }

    pub fn adam_state(&self) -> &AdamState<T> {
        &self.adam
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.inputs * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// `w1` column for a one-hot input (length `hidden`).
    fn w1_col(&self, input: usize) -> &[T] {
        &self.params[input * self.hidden..(input + 1) * self.hidden]
    }

    /// Set a single parameter block by name; used to hand-build nets.
    pub fn set_w1(&mut self, hidden: usize, input: usize, value: T) {
        let h = self.hidden;
        self.params[input * h + hidden] = value;
    }

    pub fn set_b1(&mut self, hidden: usize, value: T) {
        let (b1, _, _) = self.offsets();
        self.params[b1 + hidden] = value;
    }

    pub fn set_w2(&mut self, output: usize, hidden: usize, value: T) {
        let (_, w2, _) = self.offsets();
        self.params[w2 + output * self.hidden + hidden] = value;
    }

    pub fn set_b2(&mut self, output: usize, value: T) {
        let (_, _, b2) = self.offsets();
        self.params[b2 + output] = value;
    }

    pub fn sample_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutMask {
        sample_mask(self.hidden, self.keep_prob.as_f64(), rng)
    }

    fn check_input(&self, input: usize, mask: Option<&DropoutMask>) -> Result<()> {
        if input >= self.inputs {
            return Err(Error::IndexOutOfRange { index: input, len: self.inputs });
        }
        if let Some(m) = mask {
            if m.len() != self.hidden {
                return Err(Error::Shape { expected: self.hidden, got: m.len() });
            }
        }
        Ok(())
    }

    /// Hidden activations after ReLU and (inverted) dropout.
    fn hidden_into(&self, input: usize, mask: Option<&DropoutMask>, h: &mut [T]) {
        let (b1_off, _, _) = self.offsets();
        let b1 = &self.params[b1_off..b1_off + self.hidden];
        let scale = T::one() / self.keep_prob;
        for (j, ((hj, &w), &b)) in h.iter_mut().zip(self.w1_col(input)).zip(b1).enumerate() {
            let pre = w + b;
            *hj = match mask {
                Some(m) if !m.keep[j] => T::zero(),
                Some(_) => pre.max(T::zero()) * scale,
                None => pre.max(T::zero()),
            };
        }
    }

    fn output_into(&self, h: &[T], out: &mut [T]) {
        let (_, w2_off, b2_off) = self.offsets();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.params[w2_off + k * self.hidden..w2_off + (k + 1) * self.hidden];
            *o = self.params[b2_off + k] + row.iter().zip(h).map(|(&w, &x)| w * x).sum::<T>();
        }
    }

    /// Action values for a one-hot input, optionally under a dropout mask.
    pub fn forward(&self, input: usize, mask: Option<&DropoutMask>) -> Result<Vec<T>> {
        self.check_input(input, mask)?;
        let mut h = vec![T::zero(); self.hidden];
        let mut out = vec![T::zero(); self.outputs];
        self.hidden_into(input, mask, &mut h);
        self.output_into(&h, &mut out);
        Ok(out)
    }

    /// Greedy action under `mask` (lowest index on ties).
    pub fn act(&self, input: usize, mask: Option<&DropoutMask>) -> Result<usize> {
        Ok(crate::scalar::argmax_lowest(&self.forward(input, mask)?))
    }

    /// Mean squared error over the batch and its gradient w.r.t. every
    /// parameter. Only the head of the taken action receives error signal.
    pub fn loss_and_grad(&self, samples: &[Sample<'_, T>]) -> Result<(T, Vec<T>)> {
        if samples.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let (b1_off, w2_off, b2_off) = self.offsets();
        let hid = self.hidden;
        let mut grads = vec![T::zero(); self.params.len()];
        let mut h = vec![T::zero(); hid];
        let inv_m = T::one() / T::count(samples.len());
        let two = T::lit(2.0);
        let scale = T::one() / self.keep_prob;
        let mut loss = T::zero();
        for s in samples {
            self.check_input(s.input, s.mask)?;
            if s.action >= self.outputs {
                return Err(Error::IndexOutOfRange { index: s.action, len: self.outputs });
            }
            self.hidden_into(s.input, s.mask, &mut h);
            let row = &self.params[w2_off + s.action * hid..w2_off + (s.action + 1) * hid];
            let y = self.params[b2_off + s.action] + row.iter().zip(&h).map(|(&w, &x)| w * x).sum::<T>();
            let err = y - s.target;
            loss = loss + err * err * inv_m;
            let g = two * err * inv_m;

            grads[b2_off + s.action] = grads[b2_off + s.action] + g;
            let pre_col = self.w1_col(s.input);
            for j in 0..hid {
                grads[w2_off + s.action * hid + j] = grads[w2_off + s.action * hid + j] + g * h[j];
                let pre = pre_col[j] + self.params[b1_off + j];
                let active = pre > T::zero() && s.mask.is_none_or(|m| m.keep[j]);
                if active {
                    let factor = if s.mask.is_some() { scale } else { T::one() };
                    let dh = g * row[j] * factor;
                    grads[s.input * hid + j] = grads[s.input * hid + j] + dh;
                    grads[b1_off + j] = grads[b1_off + j] + dh;
                }
            }
        }
        Ok((loss, grads))
    }

    /// One Adam step on the batch MSE. Returns the loss before the step.
    pub fn train_batch(&mut self, samples: &[Sample<'_, T>]) -> Result<T> {
        let (loss, grads) = self.loss_and_grad(samples)?;
        adam_step(&mut self.params, &grads, &mut self.adam, &self.adam_cfg)?;
        Ok(loss)
    }

    /// Plain-text checkpoint: a small header followed by the parameter and
    /// Adam moment arrays, one value per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str("numsig-net v1\n");
        out.push_str(&format!("inputs {}\nhidden {}\noutputs {}\n", self.inputs, self.hidden, self.outputs));
        out.push_str(&format!("keep_prob {}\n", self.keep_prob));
        let a = &self.adam_cfg;
        out.push_str(&format!("adam {} {} {} {}\n", a.lr, a.beta1, a.beta2, a.eps));
        out.push_str(&format!("step {}\n", self.adam.step));
        for (name, values) in [("params", &self.params), ("m", &self.adam.m), ("v", &self.adam.v)] {
            out.push_str(&format!("{name} {}\n", values.len()));
            for v in values.iter() {
                out.push_str(&format!("{v}\n"));
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("checkpoint truncated before {what}")));
        if next("magic")? != "numsig-net v1" {
            return Err(Error::Parse("not a numsig-net v1 checkpoint".into()));
        }
        fn field<'a>(line: &'a str, key: &str) -> Result<Vec<&'a str>> {
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Parse(format!("expected `{key}`, found `{line}`")));
            }
            Ok(parts.collect())
        }
        fn num<U: std::str::FromStr>(s: &str) -> Result<U> {
            s.parse().map_err(|_| Error::Parse(format!("bad checkpoint value `{s}`")))
        }
        let inputs: usize = num(field(next("inputs")?, "inputs")?[0])?;
        let hidden: usize = num(field(next("hidden")?, "hidden")?[0])?;
        let outputs: usize = num(field(next("outputs")?, "outputs")?[0])?;
        let keep_prob = T::lit(num(field(next("keep_prob")?, "keep_prob")?[0])?);
        let a = field(next("adam")?, "adam")?;
        if a.len() != 4 {
            return Err(Error::Parse("adam line needs four values".into()));
        }
        let adam_cfg = AdamConfig { lr: T::lit(num(a[0])?), beta1: T::lit(num(a[1])?), beta2: T::lit(num(a[2])?), eps: T::lit(num(a[3])?) };
        let step: u64 = num(field(next("step")?, "step")?[0])?;
        let expected = Self::param_len(inputs, hidden, outputs);
        let mut arrays = Vec::with_capacity(3);
        for name in ["params", "m", "v"] {
            let len: usize = num(field(next(name)?, name)?[0])?;
            if len != expected {
                return Err(Error::Shape { expected, got: len });
            }
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                values.push(T::lit(num::<f64>(next(name)?.trim())?));
            }
            arrays.push(values);
        }
        let v = arrays.pop().unwrap_or_default();
        let m = arrays.pop().unwrap_or_default();
        let params = arrays.pop().unwrap_or_default();
        Ok(Self { inputs, hidden, outputs, keep_prob, adam_cfg, params, adam: AdamState { m, v, step } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_net(inputs: usize, hidden: usize, outputs: usize) -> AgentNet<f64> {
        let mut cfg = NetConfig::new(inputs, outputs);
        cfg.hidden = hidden;
        cfg.init = Init::Zeros;
        AgentNet::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    /// 2 inputs, 2 hidden, 1 output with hand-picked weights.
    fn tiny_net() -> AgentNet<f64> {
        let mut net = zero_net(2, 2, 1);
        net.set_w1(0, 0, 0.5);
        net.set_w1(1, 0, -1.0);
        net.set_w1(0, 1, 2.0);
        net.set_w1(1, 1, 0.25);
        net.set_b1(0, 0.1);
        net.set_b1(1, 0.2);
        net.set_w2(0, 0, 1.5);
        net.set_w2(0, 1, -2.0);
        net.set_b2(0, 0.3);
        net
    }

    #[test]
    fn zero_params_give_zero_output() {
        let net = zero_net(5, 7, 3);
        assert_eq!(net.forward(2, None).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn forward_matches_hand_computation() {
        let net = tiny_net();
        // input 0: pre = (0.6, -0.8) -> relu (0.6, 0) -> 1.5*0.6 + 0.3 = 1.2
        assert!((net.forward(0, None).unwrap()[0] - 1.2).abs() < 1e-12);
        // input 1: pre = (2.1, 0.45) -> 1.5*2.1 - 2*0.45 + 0.3 = 2.55
        assert!((net.forward(1, None).unwrap()[0] - 2.55).abs() < 1e-12);
    }

    #[test]
    fn ones_mask_is_scaled_forward() {
        let net = tiny_net();
        let ones = DropoutMask::ones(2);
        // hidden (2.1, 0.45) / 0.7 -> 1.5*3 - 2*0.642857.. + 0.3
        let expected = 1.5 * 2.1 / 0.7 - 2.0 * 0.45 / 0.7 + 0.3;
        assert!((net.forward(1, Some(&ones)).unwrap()[0] - expected).abs() < 1e-12);
        let dropped = DropoutMask::from_bits(vec![false, true]);
        let expected = -2.0 * 0.45 / 0.7 + 0.3;
        assert!((net.forward(1, Some(&dropped)).unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = tiny_net();
        assert!(matches!(net.forward(2, None), Err(Error::IndexOutOfRange { .. })));
        assert!(net.forward(0, Some(&DropoutMask::ones(3))).is_err());
    }

    #[test]
    fn mask_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_mask(50, 1.0, &mut rng), DropoutMask::ones(50));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kept: usize = (0..1000).map(|_| sample_mask(100, 0.7, &mut rng).kept()).sum();
        let rate = kept as f64 / 1e5;
        assert!((rate - 0.7).abs() < 0.01, "keep rate {rate}");
        let a: Vec<_> = { let mut r = ChaCha8Rng::seed_from_u64(3); (0..5).map(|_| sample_mask(50, 0.7, &mut r)).collect() };
        let b: Vec<_> = { let mut r = ChaCha8Rng::seed_from_u64(3); (0..5).map(|_| sample_mask(50, 0.7, &mut r)).collect() };
        assert_eq!(a, b);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_is_minus_lr() {
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut st, &AdamConfig::default()).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-6);
    }

    #[test]
    fn adam_recurrence_two_steps() {
        // g = 1 then g = 0.5, hand-evaluated:
        // m1 = 0.1, v1 = 0.001, step1 = -lr * 1 / (1 + 1e-8)
        // m2 = 0.09 + 0.05 = 0.14, v2 = 0.000999 + 0.00025 = 0.001249
        // m2_hat = 0.14 / 0.19, v2_hat = 0.001249 / 0.001999
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(1);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &[1.0], &mut st, &cfg).unwrap();
        adam_step(&mut p, &[0.5], &mut st, &cfg).unwrap();
        let step1 = -1e-3 * 1.0 / (1.0 + 1e-8);
        let step2 = -1e-3 * (0.14 / 0.19) / ((0.001249f64 / 0.001999).sqrt() + 1e-8);
        assert!((p[0] - (step1 + step2)).abs() < 1e-12);
        assert!((st.m[0] - 0.14).abs() < 1e-15);
        assert!((st.v[0] - 0.001249).abs() < 1e-15);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = vec![0.0; 2];
        let mut st = AdamState::new(2);
        assert!(adam_step(&mut p, &[1.0], &mut st, &AdamConfig::default()).is_err());
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut net = tiny_net();
        assert!(matches!(net.train_batch(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn exact_targets_give_zero_loss() {
        let mut net = tiny_net();
        let y = net.forward(0, None).unwrap()[0];
        let loss = net.train_batch(&[Sample { input: 0, action: 0, target: y, mask: None }]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = AgentNet::<f64>::new(&NetConfig::new(4, 3), &mut rng).unwrap();
        let mask = net.sample_mask(&mut rng);
        net.train_batch(&[Sample { input: 1, action: 2, target: 0.5, mask: Some(&mask) }]).unwrap();
        let text = net.to_checkpoint();
        let back = AgentNet::<f64>::from_checkpoint(&text).unwrap();
        assert_eq!(back, net);
        assert!(AgentNet::<f64>::from_checkpoint("garbage").is_err());
    }

    #[test]
    fn f32_net_trains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = AgentNet::<f32>::new(&NetConfig::new(3, 2), &mut rng).unwrap();
        let batch: Vec<_> = (0..3).map(|i| Sample { input: i, action: i % 2, target: 0.25 * i as f32, mask: None }).collect();
        let first = net.train_batch(&batch).unwrap();
        let mut last = first;
        for _ in 0..3000 {
            last = net.train_batch(&batch).unwrap();
        }
        assert!(last < first && last < 1e-3, "loss {first} -> {last}");
    }
}
