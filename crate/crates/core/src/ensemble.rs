//! Seeded ensembles of test functions with controlled smoothness.
//!
//! The workhorse member is a *dyadic bump sum*
//!
//! ```text
//! f = Σ_k 2^{-kβ} Σ_j ε_{kj} ψ_{kj},
//! ```
//!
//! where, for each scale `2^{-k}`, the centres `{c_j}` form a maximal
//! `2^{-k}`-separated set, `ψ_{kj}` is the tent bump of radius `2^{-k}` at
//! `c_j`, and the signs `ε_{kj} = ±1` are drawn from a seeded generator.
//! The decay exponent `β` tunes the smoothness: the scale profile of such a
//! sum follows `t^β` over the populated scale window, so harnesses get test
//! functions of prescribed regularity with a known profile slope.
//!
//! Ensembles mix in ball indicators (rough members) and white noise, and can
//! host externally smoothed members through a caller-supplied smoother.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::besov::DiscreteFunction;
use crate::error::{Error, Result};
use crate::space::PointCloudSpace;

/// Recipe for a deterministic function ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Number of members to generate.
    pub members: usize,
    /// Master seed; member `m` uses an independent stream of this seed.
    pub seed: u64,
    /// Decay exponent `β` of the dyadic bump sums.
    pub smoothness: f64,
    /// Coarsest populated scale `2^{-k₀}` (exponent `k₀ ≥ 1`).
    pub coarsest_scale_exp: u32,
    /// Finest populated scale exponent; `None` stops at `2^{-k} ≥ 2h`.
    pub finest_scale_exp: Option<u32>,
    /// Mix in ball-indicator members.
    pub include_indicators: bool,
    /// Mix in white-noise members.
    pub include_noise: bool,
}

impl EnsembleSpec {
    /// Spec with the default scale window and all member kinds enabled.
    pub fn new(members: usize, seed: u64, smoothness: f64) -> Self {
        EnsembleSpec {
            members,
            seed,
            smoothness,
            coarsest_scale_exp: 1,
            finest_scale_exp: None,
            include_indicators: true,
            include_noise: true,
        }
    }
}

/// A hook for injecting smoothed members (e.g. a potential applied to
/// noise) without this module knowing how the smoothing is built.
pub type Smoother<'a> = &'a dyn Fn(&DiscreteFunction) -> Result<DiscreteFunction>;

/// Greedy maximal `separation`-separated subset, scanned in index order:
/// every space point lies within `separation` of some selected point, and
/// selected points are pairwise at least `separation` apart.
pub fn maximal_separated_set(space: &PointCloudSpace, separation: f64) -> Vec<u32> {
    let mut covered = vec![false; space.len()];
    let mut net = Vec::new();
    for x in 0..space.len() {
        if covered[x] {
            continue;
        }
        net.push(x as u32);
        space.visit_ball(x, separation, |y, _| {
            covered[y as usize] = true;
        });
    }
    net
}

/// Tent bump `ψ(x) = max(0, 1 − d(x, centre)/radius)` as a value vector.
pub fn tent_bump_values(space: &PointCloudSpace, centre: usize, radius: f64) -> Vec<f64> {
    let mut values = vec![0.0; space.len()];
    space.visit_ball(centre, radius, |y, d2| {
        values[y as usize] = 1.0 - d2.sqrt() / radius;
    });
    values
}

/// One dyadic bump sum `Σ_k 2^{-kβ} Σ_j ε_{kj} ψ_{kj}` over scale exponents
/// `k0..=k1`, with signs drawn from `rng` in a fixed (scale, net) order.
pub fn dyadic_bump_member(
    space: &Arc<PointCloudSpace>,
    beta: f64,
    k0: u32,
    k1: u32,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteFunction> {
    if k1 < k0 {
        return Err(Error::InvalidParameter {
            name: "scale_exponents",
            message: format!("empty scale window: k0={k0}, k1={k1}"),
        });
    }
    let mut values = vec![0.0; space.len()];
    for k in k0..=k1 {
        let scale = 2.0f64.powi(-(k as i32));
        let amp = 2.0f64.powf(-(k as f64) * beta);
        for c in maximal_separated_set(space, scale) {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            space.visit_ball(c as usize, scale, |y, d2| {
                values[y as usize] += sign * amp * (1.0 - d2.sqrt() / scale);
            });
        }
    }
    DiscreteFunction::new(Arc::clone(space), values)
}

/// Indicator of the ball `B(centre, radius)`.
pub fn ball_indicator(
    space: &Arc<PointCloudSpace>,
    centre: usize,
    radius: f64,
) -> Result<DiscreteFunction> {
    let mut values = vec![0.0; space.len()];
    space.visit_ball(centre, radius, |y, _| {
        values[y as usize] = 1.0;
    });
    DiscreteFunction::new(Arc::clone(space), values)
}

/// Independent uniform `[-1, 1]` noise, deterministic in the seed.
pub fn seeded_noise(space: &Arc<PointCloudSpace>, seed: u64) -> Result<DiscreteFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DiscreteFunction::new(Arc::clone(space), values)
}

/// Finest bump-scale exponent keeping `2^{-k} ≥ 2h`.
fn default_finest_exp(space: &PointCloudSpace) -> u32 {
    let h = space.resolution();
    let k = (1.0 / (2.0 * h)).log2().floor();
    if k < 1.0 {
        1
    } else {
        k as u32
    }
}

/// Build the ensemble described by `spec`.  Member kinds cycle
/// deterministically: positions `m ≡ 3 (mod 5)` are ball indicators,
/// `m ≡ 4 (mod 5)` are noise (smoothed through `smoother` when one is
/// given), everything else is a dyadic bump sum.  Each member draws from an
/// independent stream of the master seed.
pub fn build_ensemble_with(
    space: &Arc<PointCloudSpace>,
    spec: &EnsembleSpec,
    smoother: Option<Smoother<'_>>,
) -> Result<Vec<DiscreteFunction>> {
    if spec.members == 0 {
        return Err(Error::EmptyInput("ensemble with zero members"));
    }
    if !(spec.smoothness > 0.0 && spec.smoothness < 1.0) {
        return Err(Error::InvalidParameter {
            name: "smoothness",
            message: format!("decay exponent must lie in (0,1), got {}", spec.smoothness),
        });
    }
    let k0 = spec.coarsest_scale_exp.max(1);
    let k1 = spec
        .finest_scale_exp
        .unwrap_or_else(|| default_finest_exp(space))
        .max(k0);
    let diam = space.diameter();

    let mut out = Vec::with_capacity(spec.members);
    for m in 0..spec.members {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(m as u64 + 1);
        let kind = m % 5;
        let member = if spec.include_indicators && kind == 3 {
            let centre = rng.gen_range(0..space.len());
            let radius = diam * rng.gen_range(0.125..0.34);
            ball_indicator(space, centre, radius)?
        } else if spec.include_noise && kind == 4 {
            let noise = {
                let values = (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                DiscreteFunction::new(Arc::clone(space), values)?
            };
            match smoother {
                Some(s) => s(&noise)?,
                None => noise,
            }
        } else {
            dyadic_bump_member(space, spec.smoothness, k0, k1, &mut rng)?
        };
        out.push(member);
    }
    Ok(out)
}

/// [`build_ensemble_with`] without a smoother.
pub fn build_ensemble(
    space: &Arc<PointCloudSpace>,
    spec: &EnsembleSpec,
) -> Result<Vec<DiscreteFunction>> {
    build_ensemble_with(space, spec, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{besov_profile, fit_smoothness};
    use crate::generators::grid_space;

    #[test]
    fn separated_set_is_separated_and_maximal() {
        let space = grid_space(1, 4).unwrap();
        let sep = 0.25;
        let net = maximal_separated_set(&space, sep);
        for (a_pos, &a) in net.iter().enumerate() {
            for &b in &net[a_pos + 1..] {
                assert!(space.distance(a as usize, b as usize) >= sep);
            }
        }
        for x in 0..space.len() {
            assert!(
                net.iter()
                    .any(|&c| space.distance(x, c as usize) < sep),
                "point {x} not covered"
            );
        }
    }

    #[test]
    fn tent_bump_has_unit_peak_and_compact_support() {
        let space = grid_space(1, 4).unwrap();
        let centre = space.len() / 2;
        let r = 0.25;
        let values = tent_bump_values(&space, centre, r);
        assert_eq!(values[centre], 1.0);
        for x in 0..space.len() {
            let d = space.distance(x, centre);
            if d >= r {
                assert_eq!(values[x], 0.0);
            } else {
                assert!((values[x] - (1.0 - d / r)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn indicator_matches_ball_membership() {
        let space = grid_space(2, 3).unwrap();
        let centre = 5;
        let r = 0.3;
        let f = ball_indicator(&space, centre, r).unwrap();
        for x in 0..space.len() {
            let expected = if space.distance(x, centre) < r { 1.0 } else { 0.0 };
            assert_eq!(f.value(x), expected);
        }
    }

    #[test]
    fn ensemble_is_deterministic_in_the_seed() {
        let space = grid_space(1, 5).unwrap();
        let spec = EnsembleSpec::new(7, 42, 0.4);
        let a = build_ensemble(&space, &spec).unwrap();
        let b = build_ensemble(&space, &spec).unwrap();
        assert_eq!(a.len(), 7);
        for (fa, fb) in a.iter().zip(&b) {
            assert_eq!(fa.values(), fb.values());
        }
        let other = build_ensemble(&space, &EnsembleSpec::new(7, 43, 0.4)).unwrap();
        assert!(a.iter().zip(&other).any(|(fa, fo)| fa.values() != fo.values()));
    }

    #[test]
    fn members_are_finite_and_not_identically_zero() {
        let space = grid_space(1, 6).unwrap();
        let spec = EnsembleSpec::new(10, 7, 0.5);
        for f in build_ensemble(&space, &spec).unwrap() {
            assert!(f.values().iter().all(|v| v.is_finite()));
            assert!(f.values().iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn bump_member_profile_slope_tracks_decay_exponent() {
        let space = grid_space(1, 7).unwrap();
        let beta = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = dyadic_bump_member(&space, beta, 1, 5, &mut rng).unwrap();
        let scales: Vec<f64> = (1..=5).map(|k| 2.0f64.powi(-k)).collect();
        let profile = besov_profile(&f, 2.0, &scales).unwrap();
        let slope = fit_smoothness(&profile).unwrap();
        assert!(
            (slope - beta).abs() < 0.3,
            "fitted profile slope {slope} should track β = {beta}"
        );
    }

    #[test]
    fn smoother_hook_transforms_noise_members() {
        let space = grid_space(1, 5).unwrap();
        let spec = EnsembleSpec::new(5, 3, 0.4);
        let plain = build_ensemble(&space, &spec).unwrap();
        let doubler = |f: &DiscreteFunction| f.scale(2.0);
        let hooked = build_ensemble_with(&space, &spec, Some(&doubler)).unwrap();
        // Member 4 is the noise slot: it must differ by the smoother.
        for x in 0..space.len() {
            assert!((hooked[4].value(x) - 2.0 * plain[4].value(x)).abs() < 1e-15);
        }
        // Bump members are untouched.
        assert_eq!(plain[0].values(), hooked[0].values());
    }
}
