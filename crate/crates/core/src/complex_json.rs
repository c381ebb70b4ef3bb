//! Serde adapter writing complex numbers as `{"re": .., "im": ..}`.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

pub fn serialize<S: Serializer>(z: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
    ReIm { re: z.re, im: z.im }.serialize(ser)
}

pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
    let ReIm { re, im } = ReIm::deserialize(de)?;
    Ok(Complex64::new(re, im))
}

/// Same adapter for fixed-size arrays of complex values.
pub mod array7 {
    use super::ReIm;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(zs: &[Complex64; 7], ser: S) -> Result<S::Ok, S::Error> {
        let v: Vec<ReIm> = zs.iter().map(|z| ReIm { re: z.re, im: z.im }).collect();
        v.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[Complex64; 7], D::Error> {
        let v = Vec::<ReIm>::deserialize(de)?;
        if v.len() != 7 {
            return Err(serde::de::Error::invalid_length(
                v.len(),
                &"7 complex values",
            ));
        }
        let mut out = [Complex64::new(0.0, 0.0); 7];
        for (o, z) in out.iter_mut().zip(v) {
            *o = Complex64::new(z.re, z.im);
        }
        Ok(out)
    }
}
