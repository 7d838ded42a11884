/// Uniform view over a collection of parameter (or gradient) tensors.
///
/// Models and their gradient stores enumerate tensors in the same order, so
/// optimizers and clipping can zip them without knowing the architecture.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;

    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn tensor_names(&self) -> Vec<String>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Global L2 norm over every tensor.
    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// `self += other`; shapes must be congruent.
    fn add_assign_from(&mut self, other: &dyn ParamSet) {
        let src = other.tensors();
        let mut dst = self.tensors_mut();
        assert_eq!(src.len(), dst.len(), "incongruent parameter sets");
        for (d, s) in dst.iter_mut().zip(src) {
            assert_eq!(d.len(), s.len(), "incongruent parameter tensor");
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
    }

    /// Copy of every value, in tensor order.
    fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flatten().copied().collect()
    }
}

/// Rescale `grads` so its global L2 norm is at most `max_norm`.
///
/// Returns the norm measured before clipping.
pub fn clip_gradients<G: ParamSet + ?Sized>(grads: &mut G, max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Plain tensor list, handy for tests and ad-hoc parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorList {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl TensorList {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        let names = (0..values.len()).map(|i| format!("tensor{i}")).collect();
        TensorList { names, values }
    }
}

impl ParamSet for TensorList {
    fn tensors(&self) -> Vec<&[f64]> {
        self.values.iter().map(|v| v.as_slice()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.values.iter_mut().map(|v| v.as_mut_slice()).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.names.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clipping_halves_when_norm_is_twice_the_limit() {
        // norm = sqrt(36 + 64) = 10
        let mut g = TensorList::new(vec![vec![6.0], vec![8.0]]);
        let before = clip_gradients(&mut g, 5.0);
        assert_eq!(before, 10.0);
        assert_eq!(g.values, vec![vec![3.0], vec![4.0]]);
    }

    #[test]
    fn clipping_leaves_small_and_zero_grads_alone() {
        let mut g = TensorList::new(vec![vec![0.0, 3.0]]);
        clip_gradients(&mut g, 5.0);
        assert_eq!(g.values, vec![vec![0.0, 3.0]]);
        let mut z = TensorList::new(vec![vec![0.0; 4]]);
        clip_gradients(&mut z, 5.0);
        assert_eq!(z.values, vec![vec![0.0; 4]]);
    }

    proptest! {
        #[test]
        fn clipped_norm_bounded_and_direction_kept(
            vals in prop::collection::vec(-100.0f64..100.0, 1..40),
            max_norm in 0.01f64..50.0,
        ) {
            let mut g = TensorList::new(vec![vals.clone()]);
            let before = clip_gradients(&mut g, max_norm);
            prop_assert!(g.global_norm() <= max_norm + 1e-12);
            if before > max_norm {
                let factor = max_norm / before;
                for (a, b) in g.values[0].iter().zip(&vals) {
                    prop_assert!((a - b * factor).abs() <= 1e-12 * b.abs().max(1.0));
                }
            } else {
                prop_assert_eq!(&g.values[0], &vals);
            }
        }
    }
}
