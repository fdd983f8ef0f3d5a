//! Serde adapters for the array-valued fields of the on-disk JSON records.
//! Complex matrices serialize as `{"re": [[row-major]], "im": [[row-major]]}`;
//! real matrices and vectors as plain nested arrays. Field order is fixed by
//! struct declaration order, which keeps run outputs byte-reproducible.

use ndarray::{Array1, Array2};

use crate::C64;

pub mod serde_c64_matrix {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Split {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &Array2<C64>, s: S) -> Result<S::Ok, S::Error> {
        let (rows, cols) = m.dim();
        let mut re = vec![vec![0.0; cols]; rows];
        let mut im = vec![vec![0.0; cols]; rows];
        for i in 0..rows {
            for j in 0..cols {
                re[i][j] = m[(i, j)].re;
                im[i][j] = m[(i, j)].im;
            }
        }
        Split { re, im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<C64>, D::Error> {
        let split = Split::deserialize(d)?;
        let rows = split.re.len();
        let cols = split.re.first().map_or(0, |r| r.len());
        if split.im.len() != rows
            || split.re.iter().any(|r| r.len() != cols)
            || split.im.iter().any(|r| r.len() != cols)
        {
            return Err(D::Error::custom("ragged complex matrix"));
        }
        let mut m = Array2::<C64>::zeros((rows, cols));
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = C64::new(split.re[i][j], split.im[i][j]);
            }
        }
        Ok(m)
    }
}

pub mod serde_f64_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.to_vec().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Ok(Array1::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
