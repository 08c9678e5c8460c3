//! Text serialization shared by every file format and wire body.
//!
//! All documents are UTF-8 JSON. Floats are written in the shortest decimal
//! form that parses back to the identical `f64` (never more than 17
//! significant digits), so every value round-trips bit-exactly.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

pub fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("domain types always serialize")
}

pub fn encode_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("domain types always serialize")
}

/// Parses a document, reporting schema violations with the path of the
/// offending element, e.g. `.objects[2].pose`.
pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut path = err.path().to_string();
        let message = err.inner().to_string();
        if !path.starts_with('.') {
            path.insert(0, '.');
        }
        if let Some(field) = missing_field(&message) {
            if path == "." {
                path.clear();
            }
            path = format!("{path}.{field}");
        }
        Error::Schema { path, message }
    })
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    Some(&rest[..rest.find('`')?])
}

pub fn read_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text)
}

pub fn write_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, encode_pretty(value)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;

    #[test]
    fn missing_top_level_field_names_its_path() {
        let err =
            decode::<Scene>(r#"{"id":"x","table":{"half_extents":[0.5,0.5,0.025]}}"#).unwrap_err();
        let Error::Schema { path, .. } = err else {
            panic!("{err}");
        };
        assert_eq!(path, ".objects");
    }

    #[test]
    fn nested_errors_name_the_element() {
        let text = r#"{"id":"x","table":{"half_extents":[0.5,0.5,0.025]},
            "objects":[{"class":"banana","shape":{"kind":"box","dims":[0.1,0.1,0.1]},
            "mass":1.0,"pose":{"t":[0,0,0],"r":[2,0,0,0,1,0,0,0,1]}}]}"#;
        let Error::Schema { path, message } = decode::<Scene>(text).unwrap_err() else {
            panic!();
        };
        assert_eq!(path, ".objects[0].pose");
        assert!(message.contains("orthonormal"), "{message}");

        let text = r#"{"id":"x","table":{"half_extents":[0.5,0.5,0.025]},
            "objects":[{"class":"teapot"}]}"#;
        let Error::Schema { path, .. } = decode::<Scene>(text).unwrap_err() else {
            panic!();
        };
        assert_eq!(path, ".objects[0].class");
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let values = [
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            5e-324,
            1.7976931348623157e308,
            -0.0,
        ];
        let back: Vec<f64> = decode(&encode(&values.to_vec())).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest::proptest! {
        #[test]
        fn any_finite_float_round_trips(bits in proptest::prelude::any::<u64>()) {
            let v = f64::from_bits(bits);
            proptest::prop_assume!(v.is_finite());
            let back: f64 = decode(&encode(&v)).unwrap();
            proptest::prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
