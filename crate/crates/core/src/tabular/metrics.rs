use super::TabularError;

/// Fraction of positions where `predicted` equals `actual`.
pub fn accuracy<T: PartialEq>(predicted: &[T], actual: &[T]) -> Result<f64, TabularError> {
    if predicted.len() != actual.len() {
        return Err(TabularError::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(TabularError::Empty);
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    #[test]
    fn basic_values() {
        assert_eq!(accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(accuracy(&["a", "b"], &["c", "d"]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
    }

    #[test]
    fn errors() {
        assert_eq!(
            accuracy(&[1, 2], &[1]),
            Err(TabularError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(accuracy::<u8>(&[], &[]), Err(TabularError::Empty));
    }

    proptest! {
        #[test]
        fn permutation_equivariant(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..50), seed: u64) {
            let (p, a): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<u8> = order.iter().map(|&i| p[i]).collect();
            let a2: Vec<u8> = order.iter().map(|&i| a[i]).collect();
            prop_assert_eq!(accuracy(&p, &a).unwrap(), accuracy(&p2, &a2).unwrap());
        }
    }
}
