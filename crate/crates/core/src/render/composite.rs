/// Rays stop once transmittance falls below this.
pub const TRANSMITTANCE_EPS: f64 = 1e-3;
/// Minimum accumulated opacity for a ray to report a finite depth.
pub const DEPTH_OPACITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composited {
    pub color: [f64; 3],
    /// Opacity-weighted ray distance, `None` when the ray is mostly empty.
    pub t_depth: Option<f64>,
    pub opacity: f64,
    /// Samples consumed before termination.
    pub consumed: usize,
}

/// Front-to-back accumulator fed one sample at a time.
#[derive(Debug, Clone, Copy)]
pub struct Compositor {
    color: [f64; 3],
    transmittance: f64,
    weight_sum: f64,
    weighted_t: f64,
    consumed: usize,
}

impl Default for Compositor {
    fn default() -> Self {
        Self::new()
    }
}

impl Compositor {
    pub fn new() -> Self {
        Self { color: [0.0; 3], transmittance: 1.0, weight_sum: 0.0, weighted_t: 0.0, consumed: 0 }
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn terminated(&self) -> bool {
        self.transmittance < TRANSMITTANCE_EPS
    }

    /// Adds the next sample. Returns `false` once the ray has terminated.
    pub fn push(&mut self, alpha: f64, color: [f64; 3], t: f64) -> bool {
        self.consumed += 1;
        if alpha > 0.0 {
            let w = self.transmittance * alpha;
            for (acc, c) in self.color.iter_mut().zip(color) {
                *acc += w * c;
            }
            self.weight_sum += w;
            self.weighted_t += w * t;
            self.transmittance *= 1.0 - alpha;
        }
        !self.terminated()
    }

    pub fn finish(&self) -> Composited {
        let opacity = 1.0 - self.transmittance;
        let t_depth = (opacity >= DEPTH_OPACITY && self.weight_sum > 0.0).then(|| self.weighted_t / self.weight_sum);
        Composited { color: self.color, t_depth, opacity, consumed: self.consumed }
    }
}

/// Composites `(alpha, color, t)` samples in order.
pub fn composite(samples: impl IntoIterator<Item = (f64, [f64; 3], f64)>) -> Composited {
    let mut c = Compositor::new();
    for (a, col, t) in samples {
        if !c.push(a, col, t) {
            break;
        }
    }
    c.finish()
}
