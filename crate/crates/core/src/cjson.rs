//! Complex numbers as `{ "re": .., "im": .. }` objects in every JSON
//! surface (num-complex would otherwise emit tuples).

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    ReIm { re: c.re, im: c.im }.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    let v = ReIm::deserialize(d)?;
    Ok(Complex64::new(v.re, v.im))
}

pub mod optional {
    use super::*;

    pub fn serialize<S: Serializer>(c: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        c.map(|z| ReIm { re: z.re, im: z.im }).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Complex64>, D::Error> {
        let v = Option::<ReIm>::deserialize(d)?;
        Ok(v.map(|z| Complex64::new(z.re, z.im)))
    }
}
