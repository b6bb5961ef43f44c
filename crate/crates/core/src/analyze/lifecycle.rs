use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a lifecycle inventory for a single indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleComponent {
    pub group: String,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentShare {
    pub group: String,
    pub label: String,
    pub value: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupShare {
    pub group: String,
    pub value: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifecycleReport {
    pub total: f64,
    pub components: Vec<ComponentShare>,
    /// In order of first appearance.
    pub groups: Vec<GroupShare>,
}

impl LifecycleReport {
    pub fn group(&self, name: &str) -> Option<&GroupShare> {
        self.groups.iter().find(|g| g.group == name)
    }
}

pub fn lifecycle_report(components: &[LifecycleComponent]) -> Result<LifecycleReport> {
    for c in components {
        if !(c.value.is_finite() && c.value >= 0.0) {
            return Err(Error::NegativeComponent {
                label: c.label.clone(),
                value: c.value,
            });
        }
    }
    let total: f64 = components.iter().map(|c| c.value).sum();
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    let mut groups: Vec<GroupShare> = Vec::new();
    let mut out = Vec::with_capacity(components.len());
    for c in components {
        let share = c.value / total;
        match groups.iter_mut().find(|g| g.group == c.group) {
            Some(g) => {
                g.value += c.value;
                g.share += share;
            }
            None => groups.push(GroupShare {
                group: c.group.clone(),
                value: c.value,
                share,
            }),
        }
        out.push(ComponentShare {
            group: c.group.clone(),
            label: c.label.clone(),
            value: c.value,
            share,
        });
    }
    Ok(LifecycleReport {
        total,
        components: out,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comp(group: &str, label: &str, value: f64) -> LifecycleComponent {
        LifecycleComponent {
            group: group.into(),
            label: label.into(),
            value,
        }
    }

    #[test]
    fn single_component_is_everything() {
        let r = lifecycle_report(&[comp("g", "only", 3.0)]).unwrap();
        assert_eq!(r.components[0].share, 1.0);
        assert_eq!(r.groups[0].share, 1.0);
    }

    #[test]
    fn zero_and_negative() {
        assert!(matches!(lifecycle_report(&[]), Err(Error::AllZero)));
        assert!(matches!(lifecycle_report(&[comp("g", "a", 0.0)]), Err(Error::AllZero)));
        assert!(matches!(
            lifecycle_report(&[comp("g", "a", -1.0)]),
            Err(Error::NegativeComponent { .. })
        ));
    }

    proptest! {
        #[test]
        fn shares_sum_to_one(values in proptest::collection::vec((0usize..4, 0.0f64..1e12), 1..30)) {
            prop_assume!(values.iter().any(|(_, v)| *v > 0.0));
            let comps: Vec<_> = values.iter().enumerate()
                .map(|(i, (g, v))| comp(&format!("g{g}"), &format!("c{i}"), *v))
                .collect();
            let r = lifecycle_report(&comps).unwrap();
            let cs: f64 = r.components.iter().map(|c| c.share).sum();
            let gs: f64 = r.groups.iter().map(|g| g.share).sum();
            prop_assert!((cs - 1.0).abs() < 1e-12);
            prop_assert!((gs - 1.0).abs() < 1e-12);
            for c in &r.components {
                prop_assert!((0.0..=1.0).contains(&c.share));
            }
        }
    }
}
