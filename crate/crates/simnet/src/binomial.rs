//! Inverse-CDF sampling from `Bin(k, p)` with a guide table.

/// A `Bin(k, p)` sampler. Build once per distinct `(k, p)`, then map
/// uniform variates to counts.
#[derive(Clone, Debug)]
pub struct Binomial {
    cdf: Vec<f64>,
    guide: Vec<u32>,
}

impl Binomial {
    pub fn new(k: u32, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
        let len = k as usize + 1;
        let mut pmf = vec![0.0; len];
        if p == 0.0 {
            pmf[0] = 1.0;
        } else if p == 1.0 {
            pmf[k as usize] = 1.0;
        } else {
            let (lp, lq) = (p.ln(), (1.0 - p).ln());
            let mut ln_choose = 0.0f64;
            for (c, slot) in pmf.iter_mut().enumerate() {
                if c > 0 {
                    ln_choose += ((k as usize - c + 1) as f64).ln() - (c as f64).ln();
                }
                *slot = (ln_choose + c as f64 * lp + (k as usize - c) as f64 * lq).exp();
            }
        }
        let total: f64 = pmf.iter().sum();
        let mut cdf = Vec::with_capacity(len);
        let mut acc = 0.0;
        for x in &pmf {
            acc += x / total;
            cdf.push(acc);
        }
        cdf[len - 1] = f64::INFINITY;
        let mut guide = Vec::with_capacity(len);
        let mut c = 0usize;
        for g in 0..len {
            let u = g as f64 / len as f64;
            while cdf[c] <= u {
                c += 1;
            }
            guide.push(c as u32);
        }
        Binomial { cdf, guide }
    }

    pub fn k(&self) -> u32 {
        self.cdf.len() as u32 - 1
    }

    /// Smallest `c` with `CDF(c) > u`, for `u ∈ [0, 1)`.
    #[inline]
    pub fn sample(&self, u: f64) -> u32 {
        let g = ((u * self.guide.len() as f64) as usize).min(self.guide.len() - 1);
        let mut c = self.guide[g] as usize;
        while self.cdf[c] <= u {
            c += 1;
        }
        c as u32
    }

    /// `P(X ≤ c)` as tabulated.
    pub fn cdf(&self, c: u32) -> f64 {
        self.cdf[c as usize].min(1.0)
    }
}
