//! Serde helpers: complex scalars serialize as `[re, im]` pairs and complex
//! matrices as row-major arrays of pairs.

use ndarray::Array2;
use serde::ser::SerializeSeq;
use serde::Serializer;

use crate::C64;

pub fn c64<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&v.re)?;
    seq.serialize_element(&v.im)?;
    seq.end()
}

pub fn c64_vec<S: Serializer>(v: &Vec<C64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&[x.re, x.im])?;
    }
    seq.end()
}

pub fn c64_mat<S: Serializer>(m: &Array2<C64>, s: S) -> Result<S::Ok, S::Error> {
    let mut rows = s.serialize_seq(Some(m.nrows()))?;
    for r in m.rows() {
        let row: Vec<[f64; 2]> = r.iter().map(|x| [x.re, x.im]).collect();
        rows.serialize_element(&row)?;
    }
    rows.end()
}

pub fn c64_mat_vec<S: Serializer>(v: &Vec<Array2<C64>>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for m in v {
        let rows: Vec<Vec<[f64; 2]>> = m
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| [x.re, x.im]).collect())
            .collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}
