//! Adam optimizer with bias correction.

/// Optimizer state: one first/second-moment pair per parameter tensor,
/// lazily shaped on the first step.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    slots: Vec<Moments>,
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, slots: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update: `params[i]` moves opposite `grads[i]`. The slot list is
    /// positional, so callers must pass parameters in a fixed order.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "param/grad tensor count mismatch");
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| Moments { m: vec![0.0; p.len()], v: vec![0.0; p.len()] })
                .collect();
        }
        assert_eq!(self.slots.len(), params.len(), "optimizer slot count mismatch");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), slot) in params.iter_mut().zip(grads).zip(&mut self.slots) {
            assert_eq!(p.len(), g.len(), "param/grad length mismatch");
            assert_eq!(p.len(), slot.m.len(), "optimizer slot shape mismatch");
            for i in 0..p.len() {
                let gi = g[i];
                slot.m[i] = self.beta1 * slot.m[i] + (1.0 - self.beta1) * gi;
                slot.v[i] = self.beta2 * slot.v[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = slot.m[i] / c1;
                let vhat = slot.v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
