//! JSON wire format for states and operators.
//!
//! ```json
//! {"dims": [3, 2], "shape": [6, 6], "data": [re00, im00, re01, im01, ...]}
//! ```
//!
//! `data` is row-major with real and imaginary parts interleaved. Kets use
//! `shape = [dim]`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DensityMatrix, Ket, Operator, SpaceSig};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    dims: SpaceSig,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn interleave<'a>(it: impl Iterator<Item = &'a C64>) -> Vec<f64> {
    it.flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(data: &[f64], expected: usize) -> Result<Vec<C64>> {
    if data.len() != 2 * expected {
        return Err(Error::Parse(format!(
            "expected {} interleaved values, found {}",
            2 * expected,
            data.len()
        )));
    }
    Ok(data.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

impl Wire {
    fn matrix(sig: &SpaceSig, m: &Array2<C64>) -> Self {
        Wire {
            dims: sig.clone(),
            shape: vec![m.nrows(), m.ncols()],
            data: interleave(m.iter()),
        }
    }

    fn into_matrix(self) -> Result<(SpaceSig, Array2<C64>)> {
        let d = self.dims.total_dim();
        if self.shape != [d, d] {
            return Err(Error::Parse(format!("shape {:?} does not match dims", self.shape)));
        }
        let vals = deinterleave(&self.data, d * d)?;
        let m = Array2::from_shape_vec((d, d), vals).map_err(|e| Error::Parse(e.to_string()))?;
        Ok((self.dims, m))
    }
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Wire::matrix(self.sig(), self.data()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (sig, m) = Wire::deserialize(d)?.into_matrix().map_err(serde::de::Error::custom)?;
        Operator::from_matrix(sig, m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Wire::matrix(self.sig(), self.data()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (sig, m) = Wire::deserialize(d)?.into_matrix().map_err(serde::de::Error::custom)?;
        DensityMatrix::from_matrix(sig, m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Ket {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Wire {
            dims: self.sig().clone(),
            shape: vec![self.amplitudes().len()],
            data: interleave(self.amplitudes().iter()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ket {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        let dim = w.dims.total_dim();
        if w.shape != [dim] {
            return Err(serde::de::Error::custom(format!("shape {:?} does not match dims", w.shape)));
        }
        let vals = deinterleave(&w.data, dim).map_err(serde::de::Error::custom)?;
        Ket::from_normalized(w.dims, Array1::from(vals)).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{cat_basis_state, mode_operator, CatKind, ModeOp};

    #[test]
    fn layout_is_row_major_interleaved() {
        let s = SpaceSig::single(2).unwrap();
        let mut m = Array2::<C64>::zeros((2, 2));
        m[[0, 1]] = C64::new(1.0, -2.0);
        let op = Operator::from_matrix(s, m).unwrap();
        let j = serde_json::to_value(&op).unwrap();
        assert_eq!(
            j,
            serde_json::json!({"dims": [2], "shape": [2, 2], "data": [0.0, 0.0, 1.0, -2.0, 0.0, 0.0, 0.0, 0.0]})
        );
    }

    #[test]
    fn round_trips() {
        let s = SpaceSig::new(vec![3, 2]).unwrap();
        let a = mode_operator(&s, 0, ModeOp::Annihilation).unwrap();
        let back: Operator = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);

        let k = cat_basis_state(20, C64::new(1.2, 0.4), CatKind::Zero).unwrap();
        let back: Ket = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        assert!((back.inner(&k).unwrap().norm() - 1.0).abs() < 1e-14);

        let rho = k.to_density();
        let back: DensityMatrix =
            serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn rejects_bad_payloads() {
        assert!(serde_json::from_str::<Operator>(r#"{"dims":[2],"shape":[2,2],"data":[1.0]}"#).is_err());
        assert!(serde_json::from_str::<Operator>(r#"{"dims":[0],"shape":[0,0],"data":[]}"#).is_err());
        // trace 2 is not a density matrix
        assert!(serde_json::from_str::<DensityMatrix>(
            r#"{"dims":[1],"shape":[1,1],"data":[2.0,0.0]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Operator>(
            r#"{"dims":[1],"shape":[1,1],"data":[2.0,0.0],"extra":1}"#
        )
        .is_err());
    }
}
