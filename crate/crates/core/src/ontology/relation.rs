//! Closed value sets for the three relations and the triple they form.

use std::{fmt, str::FromStr};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Value of a closed enum that does not belong to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownValue {
    pub kind: &'static str,
    pub value: String,
}

impl fmt::Display for UnknownValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown {} value {:?}", self.kind, self.value)
    }
}

impl std::error::Error for UnknownValue {}

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownValue;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let norm = crate::corpus::normalize_label(s);
                match norm.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownValue { kind: $kind, value: s.to_string() }),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

closed_enum!(
    /// Pathology type (`t`).
    PathologyType, "pathology type" {
        NeoplasticProcess => "proceso neoplasico",
        AutoimmuneProcess => "proceso autoinmune",
        Precancer => "precancer",
        Disease => "enfermedad",
        BenignTumor => "tumor benigno",
        NoDisease => "sin enfermedad",
        Infection => "infeccion",
        Symptom => "sintoma",
        Abnormality => "anormalidad",
        Syndrome => "sindrome",
        PathologicFunction => "funcion patologica",
        Poisoning => "envenenamiento",
    }
);

closed_enum!(
    /// Severity (`gr`).
    Severity, "severity" {
        Inoffensive => "inofensivo",
        Light => "leve",
        Important => "importante",
        Extreme => "extrema",
    }
);

closed_enum!(
    /// Anatomical site (`sit`).
    AnatomicalSite, "anatomical site" {
        Skin => "piel",
        Limbs => "extremidades",
        Whole => "todo",
        Hand => "mano",
        Joints => "articulaciones",
        Head => "cabeza",
        Face => "cara",
        Leg => "pierna",
        Mouth => "boca",
        Torso => "torso",
        Genitals => "genitales",
        ConnectiveTissue => "tejido conectivo",
    }
);

closed_enum!(
    /// Severity markers carried by the ICD-10 role of the snapshot.
    SeverityFlag, "severity flag" {
        Minor => "minor",
        Major => "major",
        Morbidity => "morbidity",
    }
);

closed_enum!(
    /// The three relations a cascade can learn, written with their short
    /// names `t`, `gr` and `sit`.
    Relation, "relation" {
        Type => "t",
        Severity => "gr",
        Site => "sit",
    }
);

impl Relation {
    /// Admissible values for this relation, in declaration order.
    pub fn values(self) -> Vec<&'static str> {
        match self {
            Relation::Type => PathologyType::ALL.iter().map(|v| v.as_str()).collect(),
            Relation::Severity => Severity::ALL.iter().map(|v| v.as_str()).collect(),
            Relation::Site => AnatomicalSite::ALL.iter().map(|v| v.as_str()).collect(),
        }
    }

    /// Canonical spelling of `value` if it belongs to this relation.
    pub fn parse_value(self, value: &str) -> Result<&'static str, UnknownValue> {
        Ok(match self {
            Relation::Type => value.parse::<PathologyType>()?.as_str(),
            Relation::Severity => value.parse::<Severity>()?.as_str(),
            Relation::Site => value.parse::<AnatomicalSite>()?.as_str(),
        })
    }
}

/// (type, severity, site) for one pathology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    #[serde(rename = "t")]
    pub path_type: PathologyType,
    #[serde(rename = "gr")]
    pub severity: Severity,
    #[serde(rename = "sit")]
    pub site: AnatomicalSite,
}

impl RelationTriple {
    pub fn new(path_type: PathologyType, severity: Severity, site: AnatomicalSite) -> Self {
        Self { path_type, severity, site }
    }

    pub fn get(&self, relation: Relation) -> &'static str {
        match relation {
            Relation::Type => self.path_type.as_str(),
            Relation::Severity => self.severity.as_str(),
            Relation::Site => self.site.as_str(),
        }
    }

    /// Parses `t=precancer,gr=inofensivo,sit=piel` (any order, all three
    /// required).
    pub fn parse_assignments(s: &str) -> Result<Self, UnknownValue> {
        let mut t = None;
        let mut gr = None;
        let mut sit = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| UnknownValue { kind: "relation assignment", value: part.to_string() })?;
            match k.trim().parse::<Relation>()? {
                Relation::Type => t = Some(v.parse()?),
                Relation::Severity => gr = Some(v.parse()?),
                Relation::Site => sit = Some(v.parse()?),
            }
        }
        let missing = |name: &str| UnknownValue { kind: "relation assignment", value: format!("missing {name}") };
        Ok(Self::new(
            t.ok_or_else(|| missing("t"))?,
            gr.ok_or_else(|| missing("gr"))?,
            sit.ok_or_else(|| missing("sit"))?,
        ))
    }
}

impl fmt::Display for RelationTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={},gr={},sit={}", self.path_type, self.severity, self.site)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_displays() {
        assert_eq!("Proceso  Neoplasico".parse::<PathologyType>().unwrap(), PathologyType::NeoplasticProcess);
        assert!("moderada".parse::<Severity>().is_err());
        assert_eq!(AnatomicalSite::ConnectiveTissue.to_string(), "tejido conectivo");
        assert_eq!(PathologyType::ALL.len(), 12);
        assert_eq!(Severity::ALL.len(), 4);
        assert_eq!(AnatomicalSite::ALL.len(), 12);
    }

    #[test]
    fn triple_assignments_round_trip() {
        let t = RelationTriple::parse_assignments("sit=piel, t=precancer,gr=inofensivo").unwrap();
        assert_eq!(t.to_string(), "t=precancer,gr=inofensivo,sit=piel");
        assert_eq!(RelationTriple::parse_assignments(&t.to_string()).unwrap(), t);
        assert!(RelationTriple::parse_assignments("t=precancer").is_err());
        assert!(RelationTriple::parse_assignments("x=1,t=precancer").is_err());
    }

    #[test]
    fn serde_uses_short_names() {
        let t = RelationTriple::new(PathologyType::Disease, Severity::Light, AnatomicalSite::Whole);
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"{"t":"enfermedad","gr":"leve","sit":"todo"}"#);
        assert_eq!(serde_json::from_str::<RelationTriple>(&j).unwrap(), t);
    }
}
