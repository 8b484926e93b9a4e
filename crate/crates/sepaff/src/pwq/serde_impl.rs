//! Wire format for piecewise quadratics: a list of `{p, q, r, a, b}` objects
//! where `a`/`b` are numbers or the strings `"-inf"`/`"inf"`.

use super::{PiecewiseQuadratic, QuadPiece};
use serde::de::{self, Deserializer, Unexpected};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

fn serialize_endpoint<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(v)
    } else if v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

struct EndpointVisitor;

impl de::Visitor<'_> for EndpointVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("a number or \"inf\"/\"-inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        match v {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(E::invalid_value(Unexpected::Str(v), &self)),
        }
    }
}

impl Serialize for QuadPiece {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Endpoint(f64);
        impl Serialize for Endpoint {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                serialize_endpoint(self.0, s)
            }
        }
        let mut st = s.serialize_struct("QuadPiece", 5)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("q", &self.q)?;
        st.serialize_field("r", &self.r)?;
        st.serialize_field("a", &Endpoint(self.a))?;
        st.serialize_field("b", &Endpoint(self.b))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for QuadPiece {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p: f64,
            q: f64,
            r: f64,
            a: RawEndpoint,
            b: RawEndpoint,
        }
        struct RawEndpoint(f64);
        impl<'de> Deserialize<'de> for RawEndpoint {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(EndpointVisitor).map(RawEndpoint)
            }
        }
        let raw = Raw::deserialize(d)?;
        QuadPiece::new(raw.p, raw.q, raw.r, raw.a.0, raw.b.0)
            .map_err(|e| de::Error::custom(e.to_string()))
    }
}

impl Serialize for PiecewiseQuadratic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.pieces().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseQuadratic {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pieces = Vec::<QuadPiece>::deserialize(d)?;
        PiecewiseQuadratic::new(pieces).map_err(|e| de::Error::custom(e.to_string()))
    }
}
