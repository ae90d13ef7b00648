//! `serialize_with` helpers writing complex data as numbers or `[re, im]`.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::linalg::{c64, CMat, CVec};
use crate::system::{matrix_to_doc, Entry};

pub fn complex<S: Serializer>(z: &c64, s: S) -> Result<S::Ok, S::Error> {
    Entry::from_value(*z).serialize(s)
}

pub fn complex_list<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&Entry::from_value(*z))?;
    }
    seq.end()
}

pub fn cvec<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
    complex_list(v.as_slice(), s)
}

pub fn cmat<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
    matrix_to_doc(m).serialize(s)
}
