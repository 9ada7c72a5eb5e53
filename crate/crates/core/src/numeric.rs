//! Summation helpers shared by the counting, sampling and oracle modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum of `exp(ln_x)` terms kept relative to a reference log so that tiny
/// weights neither underflow nor lose precision. The first term sets the
/// reference; it moves up when a later term would overflow the accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LnSum {
    reference: f64,
    acc: CompensatedSum,
}

impl LnSum {
    pub(crate) fn new(reference: f64) -> Self {
        LnSum {
            reference: if reference.is_finite() { reference } else { 0.0 },
            acc: CompensatedSum::default(),
        }
    }

    pub(crate) fn add_ln(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if self.acc.value() == 0.0 {
            self.reference = ln_x;
        } else if ln_x - self.reference > 600.0 {
            let shift = ln_x - self.reference;
            let v = self.acc.value() * (-shift).exp();
            self.acc = CompensatedSum::default();
            self.acc.add(v);
            self.reference = ln_x;
        }
        self.acc.add((ln_x - self.reference).exp());
    }

    /// `ln Σ exp(ln_x)`; negative infinity for an empty sum.
    pub(crate) fn ln(&self) -> f64 {
        let v = self.acc.value();
        if v > 0.0 {
            v.ln() + self.reference
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `Σ exp(ln_x) / exp(ln_scale)`.
    pub(crate) fn ratio_to(&self, ln_scale: f64) -> f64 {
        self.acc.value() * (self.reference - ln_scale).exp()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
