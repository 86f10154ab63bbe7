const INIT_BUFFER: usize = 75;
const BASE_WINDOW: usize = 25;
const TERM_BUFFER: usize = 50;

/// Warmup phases: a step-size-only buffer, metric windows of growing
/// length, then a terminal step-size-only buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptSchedule {
    pub init_buffer: usize,
    pub windows: Vec<usize>,
    pub term_buffer: usize,
}

impl AdaptSchedule {
    /// Phase lengths in order; they sum to the warmup length.
    pub fn phases(&self) -> Vec<usize> {
        let mut out = vec![self.init_buffer];
        out.extend(&self.windows);
        out.push(self.term_buffer);
        out.retain(|&n| n > 0);
        out
    }

    /// Zero-based warmup iterations at which a metric window closes.
    pub fn window_ends(&self) -> Vec<usize> {
        let mut end = self.init_buffer;
        self.windows
            .iter()
            .map(|w| {
                end += w;
                end - 1
            })
            .collect()
    }

    /// Whether warmup iteration `i` contributes to a metric estimate.
    pub fn in_window(&self, i: usize) -> bool {
        let total: usize = self.windows.iter().sum();
        i >= self.init_buffer && i < self.init_buffer + total
    }
}

/// Splits `n_warmup` into 75 / 25-doubling / 50 phases. When those do not
/// fit, the buffers become 15% and 10% of warmup with a single window in
/// between; below 20 iterations only the step size adapts.
pub fn adapt_schedule(n_warmup: usize) -> AdaptSchedule {
    if n_warmup < 20 {
        return AdaptSchedule {
            init_buffer: n_warmup,
            windows: vec![],
            term_buffer: 0,
        };
    }
    let (init, term, base) = if INIT_BUFFER + BASE_WINDOW + TERM_BUFFER > n_warmup {
        let init = (0.15 * n_warmup as f64) as usize;
        let term = (0.1 * n_warmup as f64) as usize;
        (init, term, n_warmup - init - term)
    } else {
        (INIT_BUFFER, TERM_BUFFER, BASE_WINDOW)
    };
    let slow_end = n_warmup - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < slow_end {
        let mut end = start + size;
        // After the first, a window that would leave less than twice its
        // size is stretched to the terminal buffer.
        if !windows.is_empty() && end + 2 * size > slow_end {
            end = slow_end;
        }
        windows.push(end - start);
        start = end;
        size *= 2;
    }
    AdaptSchedule {
        init_buffer: init,
        windows,
        term_buffer: term,
    }
}

/// Nesterov dual averaging of `log ε` toward a target acceptance rate.
#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    mu: f64,
    delta: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

const DA_GAMMA: f64 = 0.05;
const DA_T0: f64 = 10.0;
const DA_KAPPA: f64 = 0.75;

impl DualAveraging {
    pub fn new(step_size: f64, delta: f64) -> Self {
        Self {
            mu: (10.0 * step_size).ln(),
            delta,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Re-centres on `step_size` and forgets the history.
    pub fn restart(&mut self, step_size: f64) {
        *self = Self::new(step_size, self.delta);
    }

    /// Returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + DA_T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / DA_GAMMA;
        let x_eta = self.counter.powf(-DA_KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// The averaged step size used after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Running per-coordinate variance.
#[derive(Debug, Clone)]
pub(crate) struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n as f64;
            *s += d * (v - *m);
        }
    }

    /// Sample variance shrunk toward `1e-3`, then reset.
    pub fn regularized_variance(&mut self) -> Vec<f64> {
        let n = self.n as f64;
        let out = self
            .m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect();
        *self = Self::new(self.mean.len());
        out
    }
}
