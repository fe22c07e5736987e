use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Elu,
    Relu,
    Tanh,
}

/// `exp(x) - 1` for `x <= 0`, branch-free so the ELU loop vectorizes.
/// Positive inputs are treated as zero.
///
/// `x = n ln2 + r` with `|r| <= ln2 / 2`; then `expm1(x) = 2^n expm1(r) + (2^n - 1)`,
/// which keeps full relative precision near zero where `n = 0`. A degree-13
/// Taylor polynomial gives `expm1(r)` to below one ulp.
#[inline(always)]
pub(crate) fn expm1_nonpositive(x: f64) -> f64 {
    const ROUND: f64 = 6755399441055744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let x = x.clamp(-700.0, 0.0);
    let shifted = x * std::f64::consts::LOG2_E + ROUND;
    let n = shifted - ROUND;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
    ] {
        p = p * r + c;
    }
    let em1_r = p * r;
    // the low mantissa bits of `shifted` hold n as a two's-complement integer
    let n_int = shifted.to_bits().wrapping_sub(ROUND.to_bits()) as i64;
    let scale = f64::from_bits(((n_int + 1023) as u64) << 52);
    scale * em1_r + (scale - 1.0)
}

#[inline(always)]
fn elu_portable(values: &mut [f64]) {
    values.iter_mut().for_each(|v| {
        let e = expm1_nonpositive(*v);
        *v = if *v > 0.0 { *v } else { e };
    });
}

// Rust never contracts `a * b + c` into an fma, so both paths round identically.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn elu_avx2(values: &mut [f64]) {
    elu_portable(values)
}

fn elu_in_place(values: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
        // SAFETY: the features `elu_avx2` is compiled for were detected at runtime.
        unsafe { elu_avx2(values) };
        return;
    }
    elu_portable(values)
}

impl Activation {
    pub fn apply_in_place(self, values: &mut [f64]) {
        match self {
            Activation::Elu => elu_in_place(values),
            Activation::Relu => values.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => values.iter_mut().for_each(|v| *v = v.tanh()),
        }
    }

    /// Multiplies `delta` by the activation derivative, expressed through the
    /// activation's own output `out`.
    pub fn scale_by_derivative(self, delta: &mut [f64], out: &[f64]) {
        debug_assert_eq!(delta.len(), out.len());
        match self {
            // elu(z) > 0 iff z > 0, and elu'(z) = elu(z) + 1 for z <= 0
            Activation::Elu => delta.iter_mut().zip(out).for_each(|(d, &a)| {
                if a <= 0.0 {
                    *d *= a + 1.0;
                }
            }),
            Activation::Relu => delta.iter_mut().zip(out).for_each(|(d, &a)| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }),
            Activation::Tanh => delta
                .iter_mut()
                .zip(out)
                .for_each(|(d, &a)| *d *= 1.0 - a * a),
        }
    }

    pub fn eval(self, z: f64) -> f64 {
        let mut v = [z];
        self.apply_in_place(&mut v);
        v[0]
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "elu" => Ok(Activation::Elu),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation {other:?} (expected elu, relu, tanh)")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_from_output_matches_slope() {
        for act in [Activation::Elu, Activation::Relu, Activation::Tanh] {
            for &z in &[-2.0, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let fd = (act.eval(z + h) - act.eval(z - h)) / (2.0 * h);
                let mut d = [1.0];
                act.scale_by_derivative(&mut d, &[act.eval(z)]);
                assert!((d[0] - fd).abs() < 1e-8, "{act} at {z}: {} vs {fd}", d[0]);
            }
        }
    }

    #[test]
    fn fast_expm1_matches_std() {
        let mut worst: f64 = 0.0;
        for i in 0..200_000 {
            let x = -(i as f64) * 3.7e-3 * (1.0 + (i % 7) as f64 * 1e-3);
            let want = x.exp_m1();
            let got = expm1_nonpositive(x);
            worst = worst.max(((got - want) / want).abs());
        }
        for &x in &[-1e-300, -1e-12, -1e-5, -0.34657, -0.34658, -709.0, -1e6, f64::NEG_INFINITY] {
            let want = x.exp_m1();
            let got = expm1_nonpositive(x);
            assert!(got == want || ((got - want) / want).abs() < 1e-15, "{x}: {got} vs {want}");
        }
        assert_eq!(expm1_nonpositive(0.0), 0.0);
        assert!(worst < 1e-15, "worst relative error {worst}");
    }
}
