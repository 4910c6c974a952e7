//! The three corruption regimes applied to single-modality tensors.
//!
//! Every function is pure in (input, parameters, seed). Sampling draws exact
//! counts: a fraction `r` of `N` elements always selects `floor(r * N)` positions.

use crate::error::{check_fraction, Result};
use crate::modality::{ModalityProfile, ModalitySet};
use crate::rng::{select_indices, SeedContext, Xoshiro256StarStar};
use crate::scenario::{NoiseParams, Regime, ScenarioSpec};
use crate::tensor::TensorBuffer;

/// `floor(fraction * n)`, snapping products such as `0.29 * 100` that land a few
/// ulps below an integer.
pub fn exact_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let count = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.floor()
    };
    (count as usize).min(n)
}

pub fn zero_full(x: &TensorBuffer) -> TensorBuffer {
    TensorBuffer::zeros(x.dtype(), x.shape())
}

pub fn zero_random(x: &TensorBuffer, r: f64, seed: u64) -> Result<TensorBuffer> {
    check_fraction("r", r)?;
    let mut out = x.clone();
    let count = exact_count(r, x.len());
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let data = out.data_mut();
    for i in select_indices(x.len(), count, &mut rng) {
        data.zero(i as usize);
    }
    Ok(out)
}

pub fn add_gaussian(
    x: &TensorBuffer,
    sigma: f64,
    mu: f64,
    profile: &ModalityProfile,
    seed: u64,
) -> Result<TensorBuffer> {
    NoiseParams {
        density: 0.0,
        sigma,
        mu,
    }
    .validate()?;
    if !profile.gaussian_eligible || (sigma == 0.0 && mu == 0.0) {
        return Ok(x.clone());
    }
    let (min, range) = (profile.value_min, profile.range());
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut out = x.clone();
    let data = out.data_mut();
    let mut spare = None;
    for i in 0..data.len() {
        let z = match spare.take() {
            Some(z) => z,
            None => {
                let (a, b) = rng.normal_pair();
                spare = Some(b);
                a
            }
        };
        let v = (data.get(i) - min) / range;
        let noisy = (v + mu + sigma * z).clamp(0.0, 1.0);
        data.set(i, min + noisy * range);
    }
    Ok(out)
}

pub fn add_salt_pepper(
    x: &TensorBuffer,
    density: f64,
    profile: &ModalityProfile,
    seed: u64,
) -> Result<TensorBuffer> {
    check_fraction("density", density)?;
    let mut out = x.clone();
    let count = exact_count(density, x.len());
    let salt = count.div_ceil(2);
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let data = out.data_mut();
    for (k, i) in select_indices(x.len(), count, &mut rng).into_iter().enumerate() {
        let value = if k < salt {
            profile.value_max
        } else {
            profile.value_min
        };
        data.set(i as usize, value);
    }
    Ok(out)
}

/// Gaussian noise followed by salt-and-pepper replacement, each on its own stream.
pub fn apply_nm(
    x: &TensorBuffer,
    profile: &ModalityProfile,
    noise: &NoiseParams,
    ctx: &SeedContext,
) -> Result<TensorBuffer> {
    noise.validate()?;
    let gauss_seed = ctx.with_scenario_suffix("/gauss").stream_seed();
    let sp_seed = ctx.with_scenario_suffix("/sp").stream_seed();
    let y = add_gaussian(x, noise.sigma, noise.mu, profile, gauss_seed)?;
    add_salt_pepper(&y, noise.density, profile, sp_seed)
}

/// Applies `spec` to one modality tensor. Modalities outside the corrupted subset
/// are returned unchanged.
pub fn apply_scenario(
    x: &TensorBuffer,
    spec: &ScenarioSpec,
    set: &ModalitySet,
    ctx: &SeedContext,
) -> Result<TensorBuffer> {
    let pos = set.position(&ctx.modality)?;
    if !spec.corrupted.contains(pos) {
        return Ok(x.clone());
    }
    let profile = &set.profiles()[pos];
    match &spec.regime {
        Regime::Emm => Ok(zero_full(x)),
        Regime::Rmm { r } => zero_random(x, *r, ctx.stream_seed()),
        Regime::Nm { noise, .. } => apply_nm(x, profile, noise, ctx),
    }
}

/// Severity in [0, 1] of `spec` on one modality; drives the degraded oracle.
pub fn corruption_severity(spec: &ScenarioSpec, set: &ModalitySet, modality: &str) -> Result<f64> {
    let pos = set.position(modality)?;
    if !spec.corrupted.contains(pos) {
        return Ok(0.0);
    }
    Ok(match &spec.regime {
        Regime::Emm => 1.0,
        Regime::Rmm { r } => *r,
        Regime::Nm { noise, .. } => {
            if set.profiles()[pos].gaussian_eligible {
                (noise.density + noise.sigma).min(1.0)
            } else {
                noise.density
            }
        }
    })
}

/// Mean severity over all modalities of the dataset.
pub fn mean_severity(spec: &ScenarioSpec, set: &ModalitySet) -> Result<f64> {
    let total = set
        .profiles()
        .iter()
        .map(|p| corruption_severity(spec, set, &p.name))
        .sum::<Result<f64>>()?;
    Ok(total / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modality::{deliver_profiles, ModalitySubset};
    use crate::scenario::NoiseLevel;
    use crate::tensor::{DType, TensorData};

    fn rgb() -> ModalityProfile {
        deliver_profiles()[0].clone()
    }

    fn event() -> ModalityProfile {
        deliver_profiles()[2].clone()
    }

    fn ramp(dtype: DType, shape: [usize; 3]) -> TensorBuffer {
        let mut t = TensorBuffer::zeros(dtype, shape);
        for i in 0..t.len() {
            t.data_mut().set(i, (i % 250 + 1) as f64);
        }
        t
    }

    fn zeros_in(t: &TensorBuffer) -> usize {
        t.data().iter().filter(|&v| v == 0.0).count()
    }

    #[test]
    fn exact_count_snaps_float_noise() {
        assert_eq!(exact_count(0.29, 100), 29);
        assert_eq!(exact_count(0.1, 30000), 3000);
        assert_eq!(exact_count(0.25, 10), 2);
        assert_eq!(exact_count(1.0, 7), 7);
        assert_eq!(exact_count(0.0, 7), 0);
        assert_eq!(exact_count(0.5, 7), 3);
    }

    #[test]
    fn zero_full_clears_everything() {
        let t = ramp(DType::U8, [3, 2, 2]);
        let z = zero_full(&t);
        assert_eq!(z.shape(), [3, 2, 2]);
        assert_eq!(z.data(), &TensorData::U8(vec![0; 12]));
        assert_eq!(zero_full(&z), z);
        let f = TensorBuffer::new([1, 1, 2], TensorData::F32(vec![0.5, 1.0])).unwrap();
        assert_eq!(zero_full(&f).data(), &TensorData::F32(vec![0.0, 0.0]));
    }

    #[test]
    fn zero_random_counts() {
        let t = ramp(DType::U8, [1, 100, 100]);
        assert_eq!(zero_random(&t, 0.0, 1).unwrap(), t);
        assert_eq!(zero_random(&t, 1.0, 1).unwrap(), zero_full(&t));
        let z = zero_random(&t, 0.25, 1).unwrap();
        assert_eq!(zeros_in(&z), 2500);
        assert_eq!(z.count_differences(&t), 2500);
        assert!(zero_random(&t, 1.5, 1).is_err());
        assert!(zero_random(&t, -0.1, 1).is_err());
    }

    #[test]
    fn gaussian_identity_cases() {
        let t = ramp(DType::U8, [3, 16, 16]);
        assert_eq!(add_gaussian(&t, 0.0, 0.0, &rgb(), 3).unwrap(), t);
        assert_eq!(add_gaussian(&t, 0.5, 0.0, &event(), 3).unwrap(), t);
        assert!(add_gaussian(&t, -0.1, 0.0, &rgb(), 3).is_err());
    }

    #[test]
    fn gaussian_std_on_constant_input() {
        let p = ModalityProfile::new("x", 'X', 1, 0.0, 1.0, true);
        let t = TensorBuffer::filled(DType::F32, [1, 1024, 1024], 0.5);
        let y = add_gaussian(&t, 0.2, 0.0, &p, 17).unwrap();
        let n = t.len() as f64;
        let diffs: Vec<f64> = y.data().iter().map(|v| v - 0.5).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        assert!((0.195..=0.205).contains(&sd), "sd {sd}");
    }

    #[test]
    fn salt_pepper_counts() {
        let p = rgb();
        let t = TensorBuffer::filled(DType::U8, [3, 100, 100], 128.0);
        assert_eq!(add_salt_pepper(&t, 0.0, &p, 5).unwrap(), t);
        let y = add_salt_pepper(&t, 0.1, &p, 5).unwrap();
        let salt = y.data().iter().filter(|&v| v == 255.0).count();
        let pepper = y.data().iter().filter(|&v| v == 0.0).count();
        assert_eq!((salt, pepper), (1500, 1500));
        assert_eq!(y.count_differences(&t), 3000);

        let odd = TensorBuffer::filled(DType::U8, [1, 1, 7], 9.0);
        let y = add_salt_pepper(&odd, 1.0, &p, 5).unwrap();
        let salt = y.data().iter().filter(|&v| v == 255.0).count();
        let pepper = y.data().iter().filter(|&v| v == 0.0).count();
        assert_eq!((salt, pepper), (4, 3));
        assert!(add_salt_pepper(&t, 1.01, &p, 5).is_err());
    }

    #[test]
    fn nm_identity_and_event_exemption() {
        let ctx = SeedContext::new(1, "nm-x", "rgb", "0001");
        let t = ramp(DType::U8, [3, 32, 32]);
        let none = NoiseParams {
            density: 0.0,
            sigma: 0.0,
            mu: 0.0,
        };
        assert_eq!(apply_nm(&t, &rgb(), &none, &ctx).unwrap(), t);

        let noise = NoiseParams {
            density: 0.1,
            sigma: 0.5,
            mu: 0.0,
        };
        let ectx = SeedContext::new(1, "nm-x", "event", "0001");
        let nm = apply_nm(&t, &event(), &noise, &ectx).unwrap();
        let sp_only = add_salt_pepper(
            &t,
            0.1,
            &event(),
            ectx.with_scenario_suffix("/sp").stream_seed(),
        )
        .unwrap();
        assert_eq!(nm.count_differences(&sp_only), 0);
        assert_eq!(apply_nm(&t, &rgb(), &noise, &ctx).unwrap(), apply_nm(&t, &rgb(), &noise, &ctx).unwrap());
    }

    #[test]
    fn severity() {
        let set = ModalitySet::deliver();
        let emm = ScenarioSpec::emm(&set, set.subset(&["E", "L"]).unwrap()).unwrap();
        assert_eq!(corruption_severity(&emm, &set, "event").unwrap(), 1.0);
        assert_eq!(corruption_severity(&emm, &set, "rgb").unwrap(), 0.0);
        let rmm = ScenarioSpec::rmm(&set, set.subset(&["R"]).unwrap(), 0.5).unwrap();
        assert_eq!(corruption_severity(&rmm, &set, "depth").unwrap(), 0.0);
        assert_eq!(corruption_severity(&rmm, &set, "rgb").unwrap(), 0.5);
        let nm = ScenarioSpec::nm(&set, &NoiseLevel::high()).unwrap();
        assert!((corruption_severity(&nm, &set, "rgb").unwrap() - 0.7).abs() < 1e-12);
        assert!((corruption_severity(&nm, &set, "event").unwrap() - 0.2).abs() < 1e-12);
        assert!(corruption_severity(&nm, &set, "radar").is_err());
        let clean = ScenarioSpec::emm(&set, ModalitySubset::EMPTY).unwrap();
        assert_eq!(mean_severity(&clean, &set).unwrap(), 0.0);
        assert_eq!(mean_severity(&emm, &set).unwrap(), 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn tensor() -> impl Strategy<Value = TensorBuffer> {
            (1usize..4, 1usize..12, 1usize..12, prop::collection::vec(0u8..=255, 432))
                .prop_map(|(c, h, w, v)| {
                    TensorBuffer::new([c, h, w], TensorData::U8(v[..c * h * w].to_vec())).unwrap()
                })
        }

        proptest! {
            #[test]
            fn zero_random_exact_and_deterministic(t in tensor(), r in 0.0f64..=1.0, seed: u64) {
                let a = zero_random(&t, r, seed).unwrap();
                prop_assert_eq!(&a, &zero_random(&t, r, seed).unwrap());
                let changed = a.count_differences(&t);
                prop_assert!(changed <= exact_count(r, t.len()));
                let untouched_zero = t.data().iter().filter(|&v| v == 0.0).count();
                prop_assert!(zeros_in(&a) <= untouched_zero + exact_count(r, t.len()));
                prop_assert_eq!(zero_random(&t, 1.0, seed).unwrap(), zero_full(&t));
            }

            #[test]
            fn nm_outputs_stay_in_range(
                t in tensor(), d in 0.0f64..=1.0, sigma in 0.0f64..1.0, mu in -0.5f64..0.5, seed: u64
            ) {
                let noise = NoiseParams { density: d, sigma, mu };
                let ctx = SeedContext::new(seed, "nm", "rgb", "s");
                let y = apply_nm(&t, &rgb(), &noise, &ctx).unwrap();
                prop_assert!(y.check_range(&rgb()).is_ok());
                prop_assert_eq!(&y, &apply_nm(&t, &rgb(), &noise, &ctx).unwrap());
                // salt and pepper positions survive exactly
                let sp = add_salt_pepper(&t, d, &rgb(), ctx.with_scenario_suffix("/sp").stream_seed()).unwrap();
                for i in 0..t.len() {
                    let v = sp.data().get(i);
                    if v != t.data().get(i) {
                        prop_assert_eq!(y.data().get(i), v);
                    }
                }
            }
        }
    }
}
