use super::{MergeError, TaskVector};
use crate::checkpoint::Tensor;

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<(), MergeError> {
    if a.spec.shape != b.spec.shape {
        return Err(MergeError::ShapeMismatch {
            name: b.spec.name.clone(),
            expected: a.spec.shape.clone(),
            found: b.spec.shape.clone(),
        });
    }
    Ok(())
}

/// Difference of a fine-tuned tensor from its base, in f32 working precision.
pub fn task_vector(model_t: &Tensor, base_t: &Tensor) -> Result<TaskVector, MergeError> {
    check_same_shape(base_t, model_t)?;
    let base = base_t.to_f32();
    let model = model_t.to_f32();
    let delta: Vec<f32> = model.iter().zip(&base).map(|(m, b)| m - b).collect();
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(MergeError::NonFiniteInput(model_t.spec.name.clone()));
    }
    Ok(TaskVector {
        name: model_t.spec.name.clone(),
        delta,
        source_index: 0,
    })
}

/// Keep the `ceil(density * numel)` largest-magnitude entries, zero the rest.
/// Ties at the cut-off magnitude keep the lower flat index. Density 1.0 is
/// the identity.
pub fn trim_by_density(mut tv: TaskVector, density: f64) -> TaskVector {
    assert!(
        density > 0.0 && density <= 1.0,
        "density must lie in (0, 1], got {density}"
    );
    let n = tv.delta.len();
    if density == 1.0 || n == 0 {
        return tv;
    }
    let k = (density * n as f64).ceil() as usize;
    if k >= n {
        return tv;
    }
    let mut order: Vec<usize> = (0..n).collect();
    // magnitude descending, then index ascending for deterministic ties
    order.sort_unstable_by(|&a, &b| {
        tv.delta[b]
            .abs()
            .total_cmp(&tv.delta[a].abs())
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; n];
    for &idx in &order[..k] {
        keep[idx] = true;
    }
    for (i, v) in tv.delta.iter_mut().enumerate() {
        if !keep[i] {
            *v = 0.0;
        }
    }
    tv
}

/// Elementwise consensus signs, stored 8 bits wide or as f32 depending on
/// `int8_mask`. The two representations hold the same values, so downstream
/// arithmetic is identical either way; the flag only bounds the mask's
/// memory footprint.
#[derive(Debug, Clone, PartialEq)]
pub enum SignMask {
    Int8(Vec<i8>),
    Float(Vec<f32>),
}

impl SignMask {
    pub fn len(&self) -> usize {
        match self {
            SignMask::Int8(v) => v.len(),
            SignMask::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sign at `i`: -1, 0, or +1.
    pub fn sign_at(&self, i: usize) -> i32 {
        match self {
            SignMask::Int8(v) => v[i] as i32,
            SignMask::Float(v) => {
                let x = v[i];
                if x > 0.0 {
                    1
                } else if x < 0.0 {
                    -1
                } else {
                    0
                }
            }
        }
    }
}

fn sign_of(x: f32) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Elect the consensus sign per element: the sign of the sum of the (already
/// trimmed and weighted) deltas. An exactly zero sum elects 0.
pub fn elect_signs(weighted_deltas: &[TaskVector], int8_mask: bool) -> SignMask {
    let n = weighted_deltas.first().map_or(0, |tv| tv.delta.len());
    let mut signs_i8 = Vec::with_capacity(n);
    for i in 0..n {
        let sum: f32 = weighted_deltas.iter().map(|tv| tv.delta[i]).sum();
        signs_i8.push(sign_of(sum) as i8);
    }
    if int8_mask {
        SignMask::Int8(signs_i8)
    } else {
        SignMask::Float(signs_i8.into_iter().map(|s| s as f32).collect())
    }
}

/// Sum the deltas that agree with the elected sign; with `normalize`, divide
/// by the summed raw weights of exactly those participants (skipped when that
/// divisor is zero). Elements with a zero elected sign, or no participant,
/// are zero.
pub fn disjoint_merge(
    weighted_deltas: &[TaskVector],
    raw_weights: &[f32],
    signs: &SignMask,
    normalize: bool,
) -> Vec<f32> {
    assert_eq!(weighted_deltas.len(), raw_weights.len());
    let n = signs.len();
    let mut out = vec![0.0f32; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let s = signs.sign_at(i);
        if s == 0 {
            continue;
        }
        let mut sum = 0.0f32;
        let mut weight_sum = 0.0f32;
        let mut any = false;
        for (tv, &w) in weighted_deltas.iter().zip(raw_weights) {
            let d = tv.delta[i];
            if sign_of(d) == s {
                sum += d;
                weight_sum += w;
                any = true;
            }
        }
        if !any {
            continue;
        }
        *slot = if normalize && weight_sum != 0.0 {
            sum / weight_sum
        } else {
            sum
        };
    }
    out
}

/// Per-tensor statistics from a ties merge.
#[derive(Debug, Clone, PartialEq)]
pub struct TiesStats {
    /// Fraction of entries zeroed by trimming, per model.
    pub trimmed_fraction: Vec<f64>,
    /// Fraction of elements where nonzero trimmed deltas disagree in sign.
    pub sign_conflict_fraction: f64,
}

/// Trim → weight → elect → disjoint-merge → add back onto the base.
///
/// `int8_mask` changes only the in-memory sign representation; outputs are
/// bit-identical for both settings.
pub fn ties_merge(
    base: &Tensor,
    models: &[Tensor],
    weights: &[f32],
    densities: &[f64],
    normalize: bool,
    int8_mask: bool,
) -> Result<Tensor, MergeError> {
    ties_merge_detailed(base, models, weights, densities, normalize, int8_mask)
        .map(|(tensor, _)| tensor)
}

pub fn ties_merge_detailed(
    base: &Tensor,
    models: &[Tensor],
    weights: &[f32],
    densities: &[f64],
    normalize: bool,
    int8_mask: bool,
) -> Result<(Tensor, TiesStats), MergeError> {
    assert_eq!(models.len(), weights.len());
    assert_eq!(models.len(), densities.len());
    let n = base.spec.num_elements();

    let mut weighted = Vec::with_capacity(models.len());
    let mut trimmed_fraction = Vec::with_capacity(models.len());
    for ((model, &weight), &density) in models.iter().zip(weights).zip(densities) {
        let mut tv = task_vector(model, base)?;
        tv = trim_by_density(tv, density);
        let zeroed = tv.delta.iter().filter(|v| **v == 0.0).count();
        trimmed_fraction.push(if n == 0 { 0.0 } else { zeroed as f64 / n as f64 });
        weighted.push(tv.scaled(weight));
    }

    let signs = elect_signs(&weighted, int8_mask);

    let mut conflicts = 0usize;
    for i in 0..n {
        let mut has_pos = false;
        let mut has_neg = false;
        for tv in &weighted {
            match sign_of(tv.delta[i]) {
                1 => has_pos = true,
                -1 => has_neg = true,
                _ => {}
            }
        }
        if has_pos && has_neg {
            conflicts += 1;
        }
    }

    let merged = disjoint_merge(&weighted, weights, &signs, normalize);
    let base_values = base.to_f32();
    let out: Vec<f32> = base_values
        .iter()
        .zip(&merged)
        .map(|(b, d)| b + d)
        .collect();
    let stats = TiesStats {
        trimmed_fraction,
        sign_conflict_fraction: if n == 0 { 0.0 } else { conflicts as f64 / n as f64 },
    };
    Ok((
        Tensor::from_f32(&base.spec.name, base.spec.shape.clone(), &out),
        stats,
    ))
}

/// Weighted sum of the tensors themselves; with `normalize`, divided by the
/// weight sum.
pub fn linear_merge(
    tensors: &[Tensor],
    weights: &[f32],
    normalize: bool,
) -> Result<Tensor, MergeError> {
    assert!(!tensors.is_empty());
    assert_eq!(tensors.len(), weights.len());
    for t in &tensors[1..] {
        check_same_shape(&tensors[0], t)?;
    }
    let weight_sum: f32 = weights.iter().sum();
    if normalize && weight_sum == 0.0 {
        return Err(MergeError::ZeroWeightSum);
    }
    let mut acc: Vec<f32> = tensors[0].to_f32();
    for v in &mut acc {
        *v *= weights[0];
    }
    for (t, &w) in tensors.iter().zip(weights).skip(1) {
        for (slot, x) in acc.iter_mut().zip(t.to_f32()) {
            *slot += w * x;
        }
    }
    if normalize {
        for v in &mut acc {
            *v /= weight_sum;
        }
    }
    Ok(Tensor::from_f32(
        &tensors[0].spec.name,
        tensors[0].spec.shape.clone(),
        &acc,
    ))
}

/// Spherical interpolation between two tensors, flattened to vectors. Falls
/// back to plain lerp when the vectors are (nearly) colinear or one is zero.
pub fn slerp_merge(a: &Tensor, b: &Tensor, t: f64) -> Result<Tensor, MergeError> {
    assert!((0.0..=1.0).contains(&t), "t must lie in [0, 1], got {t}");
    check_same_shape(a, b)?;
    let av = a.to_f32();
    let bv = b.to_f32();

    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (&x, &y) in av.iter().zip(&bv) {
        dot += x as f64 * y as f64;
        norm_a += x as f64 * x as f64;
        norm_b += y as f64 * y as f64;
    }
    norm_a = norm_a.sqrt();
    norm_b = norm_b.sqrt();

    let colinear = if norm_a == 0.0 || norm_b == 0.0 {
        true
    } else {
        let cos = (dot / (norm_a * norm_b)).clamp(-1.0, 1.0);
        cos.abs() > 1.0 - 1e-8
    };

    let (ca, cb) = if colinear {
        ((1.0 - t) as f32, t as f32)
    } else {
        let omega = (dot / (norm_a * norm_b)).clamp(-1.0, 1.0).acos();
        let sin_omega = omega.sin();
        (
            (((1.0 - t) * omega).sin() / sin_omega) as f32,
            ((t * omega).sin() / sin_omega) as f32,
        )
    };

    let out: Vec<f32> = av
        .iter()
        .zip(&bv)
        .map(|(&x, &y)| ca * x + cb * y)
        .collect();
    Ok(Tensor::from_f32(
        &a.spec.name,
        a.spec.shape.clone(),
        &out,
    ))
}

// Deterministic per-element generator for dare: splitmix64 streams seeded by
// the merge seed combined with a digest of the tensor name, so a given
// (tensor, seed, density) always drops the same entries on every platform.

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01B3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Dare preprocessing followed by ties sign election and disjoint merge.
pub fn dare_ties_merge(
    base: &Tensor,
    models: &[Tensor],
    weights: &[f32],
    densities: &[f64],
    seed: u64,
    normalize: bool,
    int8_mask: bool,
) -> Result<(Tensor, TiesStats), MergeError> {
    dare_merge(base, models, weights, densities, seed, normalize, int8_mask, true)
}

/// Dare preprocessing followed by a plain weighted delta sum onto the base.
pub fn dare_linear_merge(
    base: &Tensor,
    models: &[Tensor],
    weights: &[f32],
    densities: &[f64],
    seed: u64,
    normalize: bool,
) -> Result<(Tensor, TiesStats), MergeError> {
    dare_merge(base, models, weights, densities, seed, normalize, false, false)
}

#[allow(clippy::too_many_arguments)]
fn dare_merge(
    base: &Tensor,
    models: &[Tensor],
    weights: &[f32],
    densities: &[f64],
    seed: u64,
    normalize: bool,
    int8_mask: bool,
    elect: bool,
) -> Result<(Tensor, TiesStats), MergeError> {
    assert_eq!(models.len(), weights.len());
    assert_eq!(models.len(), densities.len());
    if normalize && !elect {
        let weight_sum: f32 = weights.iter().sum();
        if weight_sum == 0.0 {
            return Err(MergeError::ZeroWeightSum);
        }
    }
    let n = base.spec.num_elements();

    let mut weighted = Vec::with_capacity(models.len());
    let mut trimmed_fraction = Vec::with_capacity(models.len());
    for ((model, &weight), &density) in models.iter().zip(weights).zip(densities) {
        let mut tv = task_vector(model, base)?;
        tv = dare_sparsify(tv, density, seed);
        let zeroed = tv.delta.iter().filter(|v| **v == 0.0).count();
        trimmed_fraction.push(if n == 0 { 0.0 } else { zeroed as f64 / n as f64 });
        weighted.push(tv.scaled(weight));
    }

    let merged: Vec<f32> = if elect {
        let signs = elect_signs(&weighted, int8_mask);
        disjoint_merge(&weighted, weights, &signs, normalize)
    } else {
        let weight_sum: f32 = weights.iter().sum();
        (0..n)
            .map(|i| {
                let sum: f32 = weighted.iter().map(|tv| tv.delta[i]).sum();
                if normalize {
                    sum / weight_sum
                } else {
                    sum
                }
            })
            .collect()
    };

    let mut conflicts = 0usize;
    for i in 0..n {
        let mut has_pos = false;
        let mut has_neg = false;
        for tv in &weighted {
            match sign_of(tv.delta[i]) {
                1 => has_pos = true,
                -1 => has_neg = true,
                _ => {}
            }
        }
        if has_pos && has_neg {
            conflicts += 1;
        }
    }

    let base_values = base.to_f32();
    let out: Vec<f32> = base_values
        .iter()
        .zip(&merged)
        .map(|(b, d)| b + d)
        .collect();
    Ok((
        Tensor::from_f32(&base.spec.name, base.spec.shape.clone(), &out),
        TiesStats {
            trimmed_fraction,
            sign_conflict_fraction: if n == 0 { 0.0 } else { conflicts as f64 / n as f64 },
        },
    ))
}

/// Drop each entry independently with probability `1 - density` and rescale
/// the survivors by `1/density`, preserving the delta in expectation.
/// Density 1.0 is the identity.
pub fn dare_sparsify(mut tv: TaskVector, density: f64, seed: u64) -> TaskVector {
    assert!(
        density > 0.0 && density <= 1.0,
        "density must lie in (0, 1], got {density}"
    );
    if density == 1.0 {
        return tv;
    }
    let mut state = seed ^ fnv1a(tv.name.as_bytes());
    let rescale = (1.0 / density) as f32;
    for v in &mut tv.delta {
        if unit_f64(splitmix64(&mut state)) < density {
            *v *= rescale;
        } else {
            *v = 0.0;
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(delta: &[f32]) -> TaskVector {
        TaskVector {
            name: "t".into(),
            delta: delta.to_vec(),
            source_index: 0,
        }
    }

    #[test]
    fn task_vector_is_elementwise_subtraction() {
        let base = Tensor::from_f32("w", vec![3], &[0.0, 0.0, 0.0]);
        let model = Tensor::from_f32("w", vec![3], &[1.0, -2.0, 3.0]);
        assert_eq!(
            task_vector(&model, &base).unwrap().delta,
            vec![1.0, -2.0, 3.0]
        );

        let same = task_vector(&base, &base).unwrap();
        assert!(same.delta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn task_vector_matches_bruteforce_on_random_pair() {
        let mut state = 7u64;
        let a: Vec<f32> = (0..64)
            .map(|_| (unit_f64(splitmix64(&mut state)) * 4.0 - 2.0) as f32)
            .collect();
        let b: Vec<f32> = (0..64)
            .map(|_| (unit_f64(splitmix64(&mut state)) * 4.0 - 2.0) as f32)
            .collect();
        let base = Tensor::from_f32("w", vec![64], &a);
        let model = Tensor::from_f32("w", vec![64], &b);
        let got = task_vector(&model, &base).unwrap().delta;
        for i in 0..64 {
            assert_eq!(got[i], b[i] - a[i]);
        }
    }

    #[test]
    fn task_vector_rejects_shape_mismatch_and_nonfinite() {
        let base = Tensor::from_f32("w", vec![2], &[0.0, 0.0]);
        let model = Tensor::from_f32("w", vec![1, 2], &[1.0, 2.0]);
        assert!(matches!(
            task_vector(&model, &base),
            Err(MergeError::ShapeMismatch { .. })
        ));

        let inf = Tensor::from_f32("w", vec![2], &[f32::INFINITY, 0.0]);
        let z = Tensor::from_f32("w", vec![2], &[0.0, 0.0]);
        assert!(matches!(
            task_vector(&inf, &z),
            Err(MergeError::NonFiniteInput(_))
        ));
    }

    #[test]
    fn trim_keeps_two_of_three_at_density_two_thirds() {
        let out = trim_by_density(tv(&[1.0, -2.0, 3.0]), 2.0 / 3.0);
        assert_eq!(out.delta, vec![0.0, -2.0, 3.0]);
    }

    #[test]
    fn trim_density_one_is_identity() {
        let delta = [0.5f32, -0.25, 0.0, 7.5];
        assert_eq!(trim_by_density(tv(&delta), 1.0).delta, delta);
    }

    #[test]
    fn trim_tie_at_cutoff_keeps_lower_index() {
        let out = trim_by_density(tv(&[5.0, 5.0, 1.0]), 1.0 / 3.0);
        assert_eq!(out.delta, vec![5.0, 0.0, 0.0]);
    }

    #[test]
    fn trim_matches_rank_oracle() {
        // independent oracle: rank by strict magnitude dominance
        fn oracle(delta: &[f32], density: f64) -> Vec<f32> {
            let k = (density * delta.len() as f64).ceil() as usize;
            delta
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let rank = delta
                        .iter()
                        .enumerate()
                        .filter(|&(j, &u)| {
                            u.abs() > v.abs() || (u.abs() == v.abs() && j < i)
                        })
                        .count();
                    if rank < k {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        let mut state = 99u64;
        for case in 0..50 {
            let n = 1 + (splitmix64(&mut state) % 32) as usize;
            let delta: Vec<f32> = (0..n)
                .map(|_| ((unit_f64(splitmix64(&mut state)) * 8.0 - 4.0) * 0.5) as f32)
                .collect();
            let density = (unit_f64(splitmix64(&mut state)) * 0.99 + 0.01).min(1.0);
            let got = trim_by_density(tv(&delta), density).delta;
            assert_eq!(got, oracle(&delta, density), "case {case}: d={density} {delta:?}");
        }
    }

    #[test]
    fn trim_retained_sets_are_nested_across_densities() {
        let mut state = 3u64;
        let delta: Vec<f32> = (0..40)
            .map(|_| (unit_f64(splitmix64(&mut state)) * 2.0 - 1.0) as f32)
            .collect();
        let mut previous: Option<Vec<bool>> = None;
        for step in 1..=20 {
            let density = step as f64 / 20.0;
            let kept: Vec<bool> = trim_by_density(tv(&delta), density)
                .delta
                .iter()
                .map(|&v| v != 0.0)
                .collect();
            if let Some(prev) = &previous {
                for i in 0..kept.len() {
                    assert!(!prev[i] || kept[i], "retention not monotone at {i}");
                }
            }
            previous = Some(kept);
        }
    }

    #[test]
    fn elect_signs_hand_example() {
        let deltas = [tv(&[2.0, -1.0, 3.0]), tv(&[-2.0, 2.0, 1.0])];
        for int8 in [true, false] {
            let signs = elect_signs(&deltas, int8);
            assert_eq!(signs.sign_at(0), 0); // sum 0
            assert_eq!(signs.sign_at(1), 1); // sum 1
            assert_eq!(signs.sign_at(2), 1); // sum 4
        }
    }

    #[test]
    fn elect_signs_single_voter_and_opposites() {
        let one = [tv(&[1.5, -0.5, 0.0])];
        let signs = elect_signs(&one, true);
        assert_eq!(
            (0..3).map(|i| signs.sign_at(i)).collect::<Vec<_>>(),
            vec![1, -1, 0]
        );

        let opposite = [tv(&[1.0, -2.0]), tv(&[-1.0, 2.0])];
        let signs = elect_signs(&opposite, false);
        assert_eq!(signs.sign_at(0), 0);
        assert_eq!(signs.sign_at(1), 0);
    }

    #[test]
    fn disjoint_merge_hand_example() {
        let deltas = [tv(&[2.0, -1.0, 3.0]), tv(&[-2.0, 2.0, 1.0])];
        let signs = elect_signs(&deltas, true);
        let normalized = disjoint_merge(&deltas, &[1.0, 1.0], &signs, true);
        assert_eq!(normalized, vec![0.0, 2.0, 2.0]);
        let plain = disjoint_merge(&deltas, &[1.0, 1.0], &signs, false);
        assert_eq!(plain, vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn disjoint_merge_single_participant_is_identity() {
        let deltas = [tv(&[0.5, -1.5, 0.0])];
        let signs = elect_signs(&deltas, false);
        assert_eq!(
            disjoint_merge(&deltas, &[1.0], &signs, true),
            vec![0.5, -1.5, 0.0]
        );
    }

    #[test]
    fn ties_merge_worked_three_element_example() {
        let base = Tensor::from_f32("w", vec![3], &[0.0, 0.0, 0.0]);
        let model_a = Tensor::from_f32("w", vec![3], &[1.0, -2.0, 3.0]);
        let model_b = Tensor::from_f32("w", vec![3], &[2.0, 1.0, -0.5]);
        let merged = ties_merge(
            &base,
            &[model_a, model_b],
            &[1.0, 1.0],
            &[2.0 / 3.0, 2.0 / 3.0],
            true,
            true,
        )
        .unwrap();
        assert_eq!(merged.to_f32(), vec![2.0, -2.0, 3.0]);
    }

    #[test]
    fn ties_single_model_full_density_is_identity_transplant() {
        let base = Tensor::from_f32("w", vec![4], &[0.25, -1.5, 2.0, 0.0]);
        let model = Tensor::from_f32("w", vec![4], &[1.0, 0.5, -0.75, 2.5]);
        let merged = ties_merge(&base, std::slice::from_ref(&model), &[1.0], &[1.0], true, false).unwrap();
        assert_eq!(merged.data, model.data);
    }

    #[test]
    fn ties_models_equal_to_base_return_base() {
        let base = Tensor::from_f32("w", vec![3], &[0.5, -0.25, 1.0]);
        let merged = ties_merge(
            &base,
            &[base.clone(), base.clone()],
            &[0.7, 0.3],
            &[0.5, 1.0],
            true,
            true,
        )
        .unwrap();
        assert_eq!(merged.data, base.data);
    }

    #[test]
    fn int8_mask_does_not_change_output_bits() {
        let base = Tensor::from_f32("w", vec![5], &[0.1, 0.2, 0.3, -0.4, 0.5]);
        let a = Tensor::from_f32("w", vec![5], &[1.0, 0.1, -0.3, -1.4, 0.0]);
        let b = Tensor::from_f32("w", vec![5], &[-0.9, 0.5, 0.4, -0.2, 0.75]);
        let with = ties_merge(&base, &[a.clone(), b.clone()], &[0.6, 0.4], &[0.6, 0.8], true, true)
            .unwrap();
        let without =
            ties_merge(&base, &[a, b], &[0.6, 0.4], &[0.6, 0.8], true, false).unwrap();
        assert_eq!(with.data, without.data);
    }

    #[test]
    fn scaling_all_weights_preserves_signs_and_normalized_output() {
        let deltas = [tv(&[2.0, -1.0, 3.0, 0.25]), tv(&[-2.0, 2.0, 1.0, -4.0])];
        let weights = [0.5f32, 1.5];
        let c = 4.0f32;
        let scaled: Vec<TaskVector> = deltas.iter().map(|d| d.clone().scaled(c)).collect();
        let scaled_weights: Vec<f32> = weights.iter().map(|w| w * c).collect();

        let signs = elect_signs(&deltas, true);
        let signs_scaled = elect_signs(&scaled, true);
        for i in 0..4 {
            assert_eq!(signs.sign_at(i), signs_scaled.sign_at(i));
        }

        let out = disjoint_merge(&deltas, &weights, &signs, true);
        let out_scaled = disjoint_merge(&scaled, &scaled_weights, &signs_scaled, true);
        for i in 0..4 {
            let rel = (out[i] - out_scaled[i]).abs() / out[i].abs().max(1e-9);
            assert!(rel < 1e-6, "element {i}: {} vs {}", out[i], out_scaled[i]);
        }
    }

    #[test]
    fn linear_merge_degenerate_weights_return_first_input() {
        let a = Tensor::from_f32("w", vec![3], &[1.5, -2.25, 0.125]);
        let b = Tensor::from_f32("w", vec![3], &[9.0, 9.0, 9.0]);
        let out = linear_merge(&[a.clone(), b], &[1.0, 0.0], false).unwrap();
        assert_eq!(out.data, a.data);
    }

    #[test]
    fn linear_merge_average() {
        let a = Tensor::from_f32("w", vec![1], &[2.0]);
        let b = Tensor::from_f32("w", vec![1], &[4.0]);
        let out = linear_merge(&[a, b], &[0.5, 0.5], true).unwrap();
        assert_eq!(out.to_f32(), vec![3.0]);
    }

    #[test]
    fn linear_merge_matches_elementwise_oracle() {
        let mut state = 11u64;
        let mut rand_tensor = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| (unit_f64(splitmix64(&mut state)) * 2.0 - 1.0) as f32)
                .collect()
        };
        let (xs, ys, zs) = (rand_tensor(32), rand_tensor(32), rand_tensor(32));
        let weights = [0.3f32, -0.2, 1.1];
        let out = linear_merge(
            &[
                Tensor::from_f32("w", vec![32], &xs),
                Tensor::from_f32("w", vec![32], &ys),
                Tensor::from_f32("w", vec![32], &zs),
            ],
            &weights,
            false,
        )
        .unwrap()
        .to_f32();
        for i in 0..32 {
            let want = weights[0] * xs[i] + weights[1] * ys[i] + weights[2] * zs[i];
            assert!((out[i] - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
    }

    #[test]
    fn linear_merge_zero_weight_sum_with_normalize_fails() {
        let a = Tensor::from_f32("w", vec![1], &[1.0]);
        let b = Tensor::from_f32("w", vec![1], &[2.0]);
        assert!(matches!(
            linear_merge(&[a, b], &[1.0, -1.0], true),
            Err(MergeError::ZeroWeightSum)
        ));
    }

    #[test]
    fn slerp_quarter_circle_midpoint() {
        let a = Tensor::from_f32("w", vec![2], &[1.0, 0.0]);
        let b = Tensor::from_f32("w", vec![2], &[0.0, 1.0]);
        let out = slerp_merge(&a, &b, 0.5).unwrap().to_f32();
        let expected = (2.0f64.sqrt() / 2.0) as f32;
        assert!((out[0] - expected).abs() < 1e-7, "{out:?}");
        assert!((out[1] - expected).abs() < 1e-7, "{out:?}");
    }

    #[test]
    fn slerp_endpoints_return_inputs() {
        let a = Tensor::from_f32("w", vec![3], &[0.5, -1.0, 2.0]);
        let b = Tensor::from_f32("w", vec![3], &[1.0, 3.0, -0.5]);
        assert_eq!(slerp_merge(&a, &b, 0.0).unwrap().data, a.data);
        assert_eq!(slerp_merge(&a, &b, 1.0).unwrap().data, b.data);
    }

    #[test]
    fn slerp_colinear_falls_back_to_lerp() {
        let a = Tensor::from_f32("w", vec![3], &[1.0, 2.0, -3.0]);
        let b = Tensor::from_f32("w", vec![3], &[2.0, 4.0, -6.0]);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let out = slerp_merge(&a, &b, t).unwrap().to_f32();
            let (av, bv) = (a.to_f32(), b.to_f32());
            for i in 0..3 {
                let lerp = (1.0 - t) as f32 * av[i] + t as f32 * bv[i];
                assert!((out[i] - lerp).abs() <= 1e-6 * lerp.abs().max(1.0));
            }
        }
    }

    #[test]
    fn slerp_zero_vector_falls_back_to_lerp() {
        let a = Tensor::from_f32("w", vec![2], &[0.0, 0.0]);
        let b = Tensor::from_f32("w", vec![2], &[3.0, 4.0]);
        let out = slerp_merge(&a, &b, 0.5).unwrap().to_f32();
        assert_eq!(out, vec![1.5, 2.0]);
    }

    #[test]
    fn dare_density_one_is_identity() {
        let delta = [0.5f32, -1.0, 2.0];
        assert_eq!(dare_sparsify(tv(&delta), 1.0, 42).delta, delta);
    }

    #[test]
    fn dare_is_deterministic_per_seed_and_name() {
        let delta: Vec<f32> = (0..64).map(|i| (i as f32) / 7.0 - 4.0).collect();
        let a = dare_sparsify(tv(&delta), 0.5, 42);
        let b = dare_sparsify(tv(&delta), 0.5, 42);
        assert_eq!(a.delta, b.delta);
        let other_seed = dare_sparsify(tv(&delta), 0.5, 43);
        assert_ne!(a.delta, other_seed.delta);
        let mut renamed = tv(&delta);
        renamed.name = "other".into();
        assert_ne!(a.delta, dare_sparsify(renamed, 0.5, 42).delta);
    }

    #[test]
    fn dare_survivors_are_rescaled_and_rest_zero() {
        let delta = [1.0f32; 16];
        let out = dare_sparsify(tv(&delta), 0.25, 7);
        for v in out.delta {
            assert!(v == 0.0 || (v - 4.0).abs() < 1e-6, "unexpected value {v}");
        }
    }

    #[test]
    fn dare_composites_with_density_one_reduce_to_plain_arithmetic() {
        let base = Tensor::from_f32("w", vec![3], &[1.0, 2.0, 3.0]);
        let a = Tensor::from_f32("w", vec![3], &[2.0, 1.0, 3.5]);
        let b = Tensor::from_f32("w", vec![3], &[0.0, 3.0, 2.5]);

        // density 1 sparsify is the identity, so dare_ties equals ties
        let (dare, _) =
            dare_ties_merge(&base, &[a.clone(), b.clone()], &[1.0, 1.0], &[1.0, 1.0], 5, true, true)
                .unwrap();
        let ties = ties_merge(&base, &[a.clone(), b.clone()], &[1.0, 1.0], &[1.0, 1.0], true, true)
            .unwrap();
        assert_eq!(dare.data, ties.data);

        // and dare_linear equals base + weighted delta sum
        let (lin, _) =
            dare_linear_merge(&base, &[a.clone(), b.clone()], &[0.5, 0.5], &[1.0, 1.0], 5, false)
                .unwrap();
        let (av, bv, basev) = (a.to_f32(), b.to_f32(), base.to_f32());
        let want: Vec<f32> = (0..3)
            .map(|i| basev[i] + 0.5 * (av[i] - basev[i]) + 0.5 * (bv[i] - basev[i]))
            .collect();
        assert_eq!(lin.to_f32(), want);
    }

    #[test]
    fn dare_mean_over_many_seeds_approximates_delta() {
        let delta: Vec<f32> = (0..32)
            .map(|i| if i % 2 == 0 { 1.0 + i as f32 / 32.0 } else { -1.0 - i as f32 / 16.0 })
            .collect();
        let draws = 10_000u64;
        let mut mean = vec![0.0f64; 32];
        for seed in 0..draws {
            let out = dare_sparsify(tv(&delta), 0.5, seed);
            for (m, v) in mean.iter_mut().zip(out.delta) {
                *m += v as f64;
            }
        }
        for (i, m) in mean.iter().enumerate() {
            let avg = m / draws as f64;
            let rel = (avg - delta[i] as f64).abs() / (delta[i] as f64).abs();
            assert!(rel < 0.05, "element {i}: mean {avg} vs {}", delta[i]);
        }
    }
}
