//! The closed set of object classes and their fixed physical and lexical
//! data.
//!
//! The synonym table here is the only place object names live: the rule
//! parser, the grammar that writes action descriptions and the mention
//! detector of the COM metric all read it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::scene::Shape;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    FoamBrick,
    CheezitBox,
    PuddingBox,
    MustardBottle,
    Banana,
    Softball,
    CoffeeCan,
    Screwdriver,
}

impl ObjectClass {
    pub const COUNT: usize = 8;

    pub const ALL: [ObjectClass; 8] = [
        ObjectClass::FoamBrick,
        ObjectClass::CheezitBox,
        ObjectClass::PuddingBox,
        ObjectClass::MustardBottle,
        ObjectClass::Banana,
        ObjectClass::Softball,
        ObjectClass::CoffeeCan,
        ObjectClass::Screwdriver,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ObjectClass> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::FoamBrick => "foam_brick",
            ObjectClass::CheezitBox => "cheezit_box",
            ObjectClass::PuddingBox => "pudding_box",
            ObjectClass::MustardBottle => "mustard_bottle",
            ObjectClass::Banana => "banana",
            ObjectClass::Softball => "softball",
            ObjectClass::CoffeeCan => "coffee_can",
            ObjectClass::Screwdriver => "screwdriver",
        }
    }

    /// Name used in generated sentences, following the wording annotators
    /// used for these objects.
    pub fn display_name(self) -> &'static str {
        match self {
            ObjectClass::FoamBrick => "foam",
            ObjectClass::CheezitBox => "cheese box",
            ObjectClass::PuddingBox => "chocolate box",
            ObjectClass::MustardBottle => "mustard container",
            ObjectClass::Banana => "banana",
            ObjectClass::Softball => "baseball",
            ObjectClass::CoffeeCan => "coffee can",
            ObjectClass::Screwdriver => "screw driver",
        }
    }

    /// Every surface form that refers to this class, lowercase and
    /// space-separated. The display name is always included.
    pub fn synonyms(self) -> &'static [&'static str] {
        match self {
            ObjectClass::FoamBrick => &["foam", "foam brick", "foam block", "brick"],
            ObjectClass::CheezitBox => &[
                "cheese box",
                "cheez-it box",
                "cheezit box",
                "cracker box",
                "cheez-it",
            ],
            ObjectClass::PuddingBox => &[
                "chocolate box",
                "pudding box",
                "chocolate pudding box",
                "pudding",
            ],
            ObjectClass::MustardBottle => &["mustard container", "mustard bottle", "mustard"],
            ObjectClass::Banana => &["banana"],
            // "baseball" is how annotators named the softball.
            ObjectClass::Softball => &["baseball", "softball", "ball"],
            ObjectClass::CoffeeCan => &["coffee can", "coffee tin", "coffee"],
            ObjectClass::Screwdriver => &["screw driver", "screwdriver"],
        }
    }

    /// Collision primitive in the body frame.
    pub fn shape(self) -> Shape {
        match self {
            ObjectClass::FoamBrick => Shape::Box {
                half_extents: [0.05, 0.075, 0.025],
            },
            ObjectClass::CheezitBox => Shape::Box {
                half_extents: [0.03, 0.08, 0.105],
            },
            ObjectClass::PuddingBox => Shape::Box {
                half_extents: [0.0445, 0.055, 0.0175],
            },
            ObjectClass::MustardBottle => Shape::Box {
                half_extents: [0.03, 0.045, 0.095],
            },
            ObjectClass::Banana => Shape::Box {
                half_extents: [0.09, 0.02, 0.018],
            },
            ObjectClass::Softball => Shape::Sphere { radius: 0.048 },
            ObjectClass::CoffeeCan => Shape::Cylinder {
                radius: 0.051,
                height: 0.14,
            },
            ObjectClass::Screwdriver => Shape::Cylinder {
                radius: 0.012,
                height: 0.20,
            },
        }
    }

    /// Mass in kilograms.
    pub fn mass(self) -> f64 {
        match self {
            ObjectClass::FoamBrick => 0.05,
            ObjectClass::CheezitBox => 0.41,
            ObjectClass::PuddingBox => 0.19,
            ObjectClass::MustardBottle => 0.6,
            ObjectClass::Banana => 0.066,
            ObjectClass::Softball => 0.18,
            ObjectClass::CoffeeCan => 0.41,
            ObjectClass::Screwdriver => 0.10,
        }
    }

    /// Orientation the object rests in before any yaw is applied. The
    /// screwdriver lies on its side; everything else stands on its body z
    /// axis.
    pub fn rest_rotation(self) -> Matrix3<f64> {
        match self {
            ObjectClass::Screwdriver => {
                *Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2)
                    .matrix()
            }
            _ => Matrix3::identity(),
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidValue(format!("unknown object class `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_round_trip() {
        for (i, class) in ObjectClass::ALL.iter().enumerate() {
            assert_eq!(class.index(), i);
            assert_eq!(ObjectClass::from_index(i), Some(*class));
            assert_eq!(class.as_str().parse::<ObjectClass>().unwrap(), *class);
        }
        assert_eq!(ObjectClass::from_index(8), None);
    }

    #[test]
    fn display_name_is_a_synonym() {
        for class in ObjectClass::ALL {
            assert_eq!(class.synonyms()[0], class.display_name());
        }
    }

    #[test]
    fn synonyms_are_unambiguous() {
        let mut seen = std::collections::HashMap::new();
        for class in ObjectClass::ALL {
            for s in class.synonyms() {
                assert_eq!(*s, s.to_lowercase());
                if let Some(other) = seen.insert(*s, class) {
                    panic!("`{s}` names both {other} and {class}");
                }
            }
        }
    }

    #[test]
    fn serde_names_match_as_str() {
        for class in ObjectClass::ALL {
            let json = serde_json::to_string(&class).unwrap();
            assert_eq!(json, format!("\"{}\"", class.as_str()));
        }
    }
}
