//! Class activation map formulations.
//!
//! All maps are produced at feature resolution. The ReLU in the weighted
//! variants is applied once, after the channel sum.

use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::grid::Grid;
use crate::tensor::{FeatureStack, GradientStack};

/// Which formulation produced a saliency map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Unweighted channel sum; not class discriminative and not rectified.
    PlainAggregate,
    /// Channel-mean gradient weights over raw features.
    GradCam,
    /// Channel-mean gradient weights over features masked by the guidance map.
    GuidedCam,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PlainAggregate => "aggregate",
            Method::GradCam => "gradcam",
            Method::GuidedCam => "guided",
        }
    }
}

/// One weight per feature channel: the spatial mean of that channel's gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights(Vec<f64>);

impl ChannelWeights {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rectified sum over channels of gradient ⊙ feature. Always nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceMap(Grid);

impl GuidanceMap {
    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

/// Saliency at feature resolution, before smoothing, normalization and upsampling.
///
/// Nonnegative for [`Method::GradCam`] and [`Method::GuidedCam`]; the plain
/// aggregate is left unclamped.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSaliency {
    grid: Grid,
    source: Method,
}

impl RawSaliency {
    pub fn new(grid: Grid, source: Method) -> Self {
        Self { grid, source }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn source(&self) -> Method {
        self.source
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}

/// Plain sum of all feature channels. No rectification.
pub fn aggregate_features(features: &FeatureStack) -> RawSaliency {
    let mut acc = alloc::vec![0.0f64; features.plane_len()];
    for plane in features.planes() {
        for (a, &m) in acc.iter_mut().zip(plane) {
            *a += f64::from(m);
        }
    }
    let (h, w) = features.spatial_dims();
    RawSaliency::new(
        Grid::new(h, w, acc).expect("plane dims"),
        Method::PlainAggregate,
    )
}

/// Spatial mean of each gradient channel.
pub fn channel_weights(gradients: &GradientStack) -> ChannelWeights {
    let z = gradients.plane_len() as f64;
    ChannelWeights(
        gradients
            .planes()
            .map(|plane| plane.iter().map(|&g| f64::from(g)).sum::<f64>() / z)
            .collect(),
    )
}

/// Gradient-weighted CAM: `ReLU(Σ_k w_k · M_k)`.
pub fn gradcam(features: &FeatureStack, weights: &ChannelWeights) -> Result<RawSaliency> {
    if weights.len() != features.channels() {
        return Err(shape_err!(
            "{} channel weights for {} feature channels",
            weights.len(),
            features.channels()
        ));
    }
    let acc = weighted_channel_sum(features, weights);
    let (h, w) = features.spatial_dims();
    let grid = Grid::new(h, w, acc)?.relu();
    Ok(RawSaliency::new(grid, Method::GradCam))
}

/// Global guidance map: `ReLU(Σ_k ∇_k ⊙ M_k)`.
pub fn guidance_map(features: &FeatureStack, gradients: &GradientStack) -> Result<GuidanceMap> {
    check_same_shape(features, gradients)?;
    let mut acc = alloc::vec![0.0f64; features.plane_len()];
    for (m_plane, g_plane) in features.planes().zip(gradients.planes()) {
        for ((a, &m), &g) in acc.iter_mut().zip(m_plane).zip(g_plane) {
            *a += f64::from(g) * f64::from(m);
        }
    }
    let (h, w) = features.spatial_dims();
    Ok(GuidanceMap(Grid::new(h, w, acc)?.relu()))
}

/// Guided CAM: `ReLU(Σ_k w_k · (G ⊙ M_k))` with `G` broadcast over channels.
///
/// `G` is a per-pixel factor common to every channel, so the sum is evaluated
/// as `G ⊙ Σ_k w_k · M_k`.
pub fn guided_cam(features: &FeatureStack, gradients: &GradientStack) -> Result<RawSaliency> {
    let guidance = guidance_map(features, gradients)?;
    let weights = channel_weights(gradients);
    let mut acc = weighted_channel_sum(features, &weights);
    for (a, &g) in acc.iter_mut().zip(guidance.grid().values()) {
        *a *= g;
    }
    let (h, w) = features.spatial_dims();
    let grid = Grid::new(h, w, acc)?.relu();
    Ok(RawSaliency::new(grid, Method::GuidedCam))
}

/// Dispatches to the formulation named by `method`.
pub fn saliency(
    features: &FeatureStack,
    gradients: &GradientStack,
    method: Method,
) -> Result<RawSaliency> {
    match method {
        Method::PlainAggregate => Ok(aggregate_features(features)),
        Method::GradCam => {
            check_same_shape(features, gradients)?;
            gradcam(features, &channel_weights(gradients))
        }
        Method::GuidedCam => guided_cam(features, gradients),
    }
}

fn weighted_channel_sum(features: &FeatureStack, weights: &ChannelWeights) -> Vec<f64> {
    let mut acc = alloc::vec![0.0f64; features.plane_len()];
    for (plane, &wk) in features.planes().zip(weights.values()) {
        for (a, &m) in acc.iter_mut().zip(plane) {
            *a += wk * f64::from(m);
        }
    }
    acc
}

fn check_same_shape(features: &FeatureStack, gradients: &GradientStack) -> Result<()> {
    if features.same_shape(gradients) {
        Ok(())
    } else {
        Err(shape_err!(
            "features {}x{}x{} vs gradients {}x{}x{}",
            features.channels(),
            features.height(),
            features.width(),
            gradients.channels(),
            gradients.height(),
            gradients.width()
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Stack;
    use alloc::vec;
    use alloc::vec::Vec;

    // Two-channel 2x2 fixture: M1=[[1,0],[0,1]], M2=[[2,2],[0,0]],
    // ∇1=[[1,1],[1,1]], ∇2=[[0,0],[-1,-1]].
    fn fixture() -> (FeatureStack, GradientStack) {
        let m = Stack::from_planes(2, 2, &[[1.0, 0.0, 0.0, 1.0], [2.0, 2.0, 0.0, 0.0]]).unwrap();
        let g = Stack::from_planes(2, 2, &[[1.0, 1.0, 1.0, 1.0], [0.0, 0.0, -1.0, -1.0]]).unwrap();
        (m.into(), g.into())
    }

    // Literal per-element oracles, written independently of the implementation.
    fn oracle_weighted(m: &Stack, w: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
        let n = m.plane_len();
        (0..n)
            .map(|p| {
                let mut s = 0.0;
                for (k, wk) in w.iter().enumerate().take(m.channels()) {
                    let g = mask.map_or(1.0, |g| g[p]);
                    s += wk * (g * f64::from(m.channel(k)[p]));
                }
                s.max(0.0)
            })
            .collect()
    }

    fn oracle_guidance(m: &Stack, g: &Stack) -> Vec<f64> {
        (0..m.plane_len())
            .map(|p| {
                (0..m.channels())
                    .map(|k| f64::from(g.channel(k)[p]) * f64::from(m.channel(k)[p]))
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect()
    }

    #[test]
    fn aggregate_matches_elementwise_sum() {
        let (m, _) = fixture();
        assert_eq!(
            aggregate_features(&m).grid().values(),
            &[3.0, 2.0, 0.0, 1.0]
        );
    }

    #[test]
    fn aggregate_single_channel_is_identity_and_keeps_negatives() {
        let m: FeatureStack = Stack::from_planes(1, 2, &[[-1.5, 2.0]]).unwrap().into();
        assert_eq!(aggregate_features(&m).grid().values(), &[-1.5, 2.0]);
    }

    #[test]
    fn aggregate_zero_stack() {
        let m: FeatureStack = Stack::new(3, 2, 2, vec![0.0; 12]).unwrap().into();
        assert!(aggregate_features(&m).grid().is_all_zero());
    }

    #[test]
    fn channel_weights_are_spatial_means() {
        let (_, g) = fixture();
        // brute-force mean: ∇1 sums to 4 over Z=4, ∇2 sums to -2 over Z=4
        let oracle: Vec<f64> = (0..2)
            .map(|k| g.channel(k).iter().map(|&v| f64::from(v)).sum::<f64>() / 4.0)
            .collect();
        assert_eq!(oracle, vec![1.0, -0.5]);
        assert_eq!(channel_weights(&g).values(), &[1.0, -0.5]);
    }

    #[test]
    fn zero_gradients_give_zero_weights() {
        let g: GradientStack = Stack::new(2, 3, 3, vec![0.0; 18]).unwrap().into();
        assert!(channel_weights(&g).values().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn gradcam_fixture() {
        let (m, _) = fixture();
        let w = ChannelWeights::new(vec![1.0, -0.5]);
        let expected = vec![0.0, 0.0, 0.0, 1.0];
        assert_eq!(oracle_weighted(&m, w.values(), None), expected);
        assert_eq!(
            gradcam(&m, &w).unwrap().grid().values(),
            expected.as_slice()
        );
    }

    #[test]
    fn gradcam_zero_weights_and_unit_weight() {
        let (m, _) = fixture();
        let out = gradcam(&m, &ChannelWeights::new(vec![0.0, 0.0])).unwrap();
        assert!(out.grid().is_all_zero());

        let single: FeatureStack = Stack::from_planes(1, 2, &[[-1.0, 3.0]]).unwrap().into();
        let out = gradcam(&single, &ChannelWeights::new(vec![1.0])).unwrap();
        assert_eq!(out.grid().values(), &[0.0, 3.0]);
    }

    #[test]
    fn gradcam_rejects_weight_count_mismatch() {
        let (m, _) = fixture();
        let err = gradcam(&m, &ChannelWeights::new(vec![1.0])).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));
    }

    #[test]
    fn guidance_fixture() {
        let (m, g) = fixture();
        let expected = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(oracle_guidance(&m, &g), expected);
        assert_eq!(
            guidance_map(&m, &g).unwrap().grid().values(),
            expected.as_slice()
        );
    }

    #[test]
    fn guidance_zero_gradients_and_unit_gradient() {
        let (m, _) = fixture();
        let zero: GradientStack = Stack::new(2, 2, 2, vec![0.0; 8]).unwrap().into();
        assert!(guidance_map(&m, &zero).unwrap().grid().is_all_zero());

        let m1: FeatureStack = Stack::from_planes(1, 2, &[[-2.0, 0.5]]).unwrap().into();
        let ones: GradientStack = Stack::from_planes(1, 2, &[[1.0, 1.0]]).unwrap().into();
        assert_eq!(
            guidance_map(&m1, &ones).unwrap().grid().values(),
            &[0.0, 0.5]
        );
    }

    #[test]
    fn guided_fixture() {
        let (m, g) = fixture();
        let gm = oracle_guidance(&m, &g);
        let expected = vec![0.0, 0.0, 0.0, 1.0];
        assert_eq!(oracle_weighted(&m, &[1.0, -0.5], Some(&gm)), expected);
        assert_eq!(
            guided_cam(&m, &g).unwrap().grid().values(),
            expected.as_slice()
        );
    }

    #[test]
    fn guided_with_unit_guidance_equals_gradcam() {
        // Single channel of ones with unit gradients: G = ReLU(1·1) = 1 everywhere.
        let m: FeatureStack = Stack::new(1, 3, 3, vec![1.0; 9]).unwrap().into();
        let g: GradientStack = Stack::new(1, 3, 3, vec![1.0; 9]).unwrap().into();
        assert!(guidance_map(&m, &g)
            .unwrap()
            .grid()
            .values()
            .iter()
            .all(|&v| v == 1.0));
        let guided = guided_cam(&m, &g).unwrap();
        let base = gradcam(&m, &channel_weights(&g)).unwrap();
        assert_eq!(guided.grid(), base.grid());
    }

    #[test]
    fn guided_zero_gradients_is_zero() {
        let (m, _) = fixture();
        let zero: GradientStack = Stack::new(2, 2, 2, vec![0.0; 8]).unwrap().into();
        assert!(guided_cam(&m, &zero).unwrap().grid().is_all_zero());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (m, _) = fixture();
        let g: GradientStack = Stack::new(2, 1, 1, vec![0.0; 2]).unwrap().into();
        assert!(guidance_map(&m, &g).is_err());
        assert!(guided_cam(&m, &g).is_err());
        assert!(saliency(&m, &g, Method::GradCam).is_err());
    }
}
