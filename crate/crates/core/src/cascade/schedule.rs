use std::{fmt, str::FromStr};

use serde::{Deserialize, Serialize};

use super::CascadeError;
use crate::ontology::Relation;

/// Order in which a cascade predicts relations: non-empty, no repeats, at
/// most three entries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Relation>", into = "Vec<Relation>")]
pub struct RelationSchedule(Vec<Relation>);

impl RelationSchedule {
    pub fn new(order: Vec<Relation>) -> Result<Self, CascadeError> {
        if order.is_empty() || order.len() > Relation::ALL.len() {
            return Err(CascadeError::InvalidSchedule(format!(
                "a schedule holds 1 to {} relations, got {}",
                Relation::ALL.len(),
                order.len()
            )));
        }
        for (i, r) in order.iter().enumerate() {
            if order[..i].contains(r) {
                return Err(CascadeError::InvalidSchedule(format!("relation {r} repeated")));
            }
        }
        Ok(Self(order))
    }

    pub fn relations(&self) -> &[Relation] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, r: Relation) -> bool {
        self.0.contains(&r)
    }

    /// Comma-separated form accepted on the command line.
    pub fn to_cli(&self) -> String {
        self.0.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(",")
    }
}

impl TryFrom<Vec<Relation>> for RelationSchedule {
    type Error = CascadeError;

    fn try_from(v: Vec<Relation>) -> Result<Self, CascadeError> {
        Self::new(v)
    }
}

impl From<RelationSchedule> for Vec<Relation> {
    fn from(s: RelationSchedule) -> Self {
        s.0
    }
}

impl fmt::Display for RelationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|r| r.as_str()).collect();
        f.write_str(&parts.join(" → "))
    }
}

/// Accepts `sit,gr,t`, `sit->gr->t` and `sit → gr → t`.
impl FromStr for RelationSchedule {
    type Err = CascadeError;

    fn from_str(s: &str) -> Result<Self, CascadeError> {
        let order = s
            .replace("->", ",")
            .replace('→', ",")
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<Relation>().map_err(|_| CascadeError::UnknownRelation(p.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(order)
    }
}

/// Every repetition-free ordering of 1..=`max_len` relations drawn from
/// `relations`: shorter schedules first, then lexicographic over the
/// relations' declaration order (t, gr, sit).
pub fn enumerate_schedules(relations: &[Relation], max_len: usize) -> Result<Vec<RelationSchedule>, CascadeError> {
    let mut pool: Vec<Relation> = relations.to_vec();
    pool.sort();
    pool.dedup();
    if pool.is_empty() {
        return Err(CascadeError::InvalidSchedule("no relations to schedule".into()));
    }
    if max_len == 0 || max_len > pool.len() {
        return Err(CascadeError::MaxLenTooLarge { max_len, relations: pool.len() });
    }
    let mut out = Vec::new();
    for len in 1..=max_len {
        let mut prefix = Vec::with_capacity(len);
        variations(&pool, len, &mut prefix, &mut out);
    }
    Ok(out)
}

fn variations(pool: &[Relation], len: usize, prefix: &mut Vec<Relation>, out: &mut Vec<RelationSchedule>) {
    if prefix.len() == len {
        out.push(RelationSchedule(prefix.clone()));
        return;
    }
    for &r in pool {
        if !prefix.contains(&r) {
            prefix.push(r);
            variations(pool, len, prefix, out);
            prefix.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Relation::*;

    #[test]
    fn counts_follow_closed_form() {
        assert_eq!(enumerate_schedules(&[Type, Severity, Site], 3).unwrap().len(), 15);
        assert_eq!(enumerate_schedules(&[Type], 1).unwrap().len(), 1);
        assert_eq!(enumerate_schedules(&[Type, Site], 1).unwrap().len(), 2);
    }

    #[test]
    fn two_relation_order() {
        let got: Vec<String> = enumerate_schedules(&[Severity, Type], 2).unwrap().iter().map(|s| s.to_cli()).collect();
        assert_eq!(got, vec!["t", "gr", "t,gr", "gr,t"]);
    }

    #[test]
    fn max_len_beyond_pool() {
        assert!(matches!(
            enumerate_schedules(&[Type], 2),
            Err(CascadeError::MaxLenTooLarge { max_len: 2, relations: 1 })
        ));
    }

    #[test]
    fn parse_and_display() {
        let s: RelationSchedule = "sit,gr,t".parse().unwrap();
        assert_eq!(s.to_string(), "sit → gr → t");
        assert_eq!("sit -> gr -> t".parse::<RelationSchedule>().unwrap(), s);
        assert_eq!(s.to_string().parse::<RelationSchedule>().unwrap(), s);
        assert!("t,t".parse::<RelationSchedule>().is_err());
        assert!("".parse::<RelationSchedule>().is_err());
        assert!(matches!("t,x".parse::<RelationSchedule>(), Err(CascadeError::UnknownRelation(_))));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"["sit","gr","t"]"#);
        assert!(serde_json::from_str::<RelationSchedule>(r#"["t","t"]"#).is_err());
    }
}
