//! Synthetic policies for the scaling experiments: a 1-of-N choice between
//! N rules, each rule an all-of-k gate over its own attributes `r{i}:a{j}`.

use cpabe_core::policy::{AttributeName, AttributeSet, PolicyError, PolicyNode, PolicyTree};

/// Attributes of rule `rule` (1-based).
pub fn rule_attributes(rule: usize, attrs_per_rule: usize) -> Vec<String> {
    (1..=attrs_per_rule).map(|j| format!("r{rule}:a{j}")).collect()
}

pub fn rule_attribute_set(rule: usize, attrs_per_rule: usize) -> AttributeSet {
    rule_attributes(rule, attrs_per_rule)
        .iter()
        .map(|a| AttributeName::new(a).expect("generated names are valid"))
        .collect()
}

pub fn generate_policy(rules: usize, attrs_per_rule: usize) -> Result<PolicyTree, PolicyError> {
    if rules == 0 || attrs_per_rule == 0 {
        return Err(PolicyError::ArityError(format!(
            "need at least one rule and one attribute, got {rules}x{attrs_per_rule}"
        )));
    }
    let children = (1..=rules)
        .map(|i| {
            let children = rule_attributes(i, attrs_per_rule)
                .iter()
                .map(|a| AttributeName::new(a).map(PolicyNode::Leaf))
                .collect::<Result<_, _>>()?;
            Ok(PolicyNode::Gate { threshold: attrs_per_rule, children })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    PolicyTree::from_root(PolicyNode::Gate { threshold: 1, children })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cpabe_core::policy::oracle::evaluate;
    use cpabe_core::policy::satisfies;

    #[test]
    fn ten_by_five() {
        let t = generate_policy(10, 5).unwrap();
        assert_eq!(t.leaf_count(), 50);
        match t.root() {
            PolicyNode::Gate { threshold, children } => {
                assert_eq!(*threshold, 1);
                assert_eq!(children.len(), 10);
            }
            PolicyNode::Leaf(_) => panic!("root must be a gate"),
        }
        assert!(t.text().ends_with("5of5 1of10"));
    }

    #[test]
    fn one_by_one() {
        let t = generate_policy(1, 1).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.text(), "r1:a1 1of1 1of1");
    }

    #[test]
    fn satisfaction_matches_oracle() {
        let t = generate_policy(10, 5).unwrap();
        let rule7 = rule_attribute_set(7, 5);
        assert!(satisfies(&t, &rule7).is_satisfied());
        assert!(evaluate(t.root(), &rule7));

        let mut mixed: AttributeSet = rule_attribute_set(1, 5).into_iter().take(3).collect();
        mixed.extend(rule_attribute_set(2, 5).into_iter().take(2));
        assert!(!satisfies(&t, &mixed).is_satisfied());
        assert!(!evaluate(t.root(), &mixed));
    }

    #[test]
    fn limits_and_zero_sizes() {
        assert!(matches!(generate_policy(0, 5), Err(PolicyError::ArityError(_))));
        assert!(matches!(generate_policy(5, 0), Err(PolicyError::ArityError(_))));
        assert!(matches!(generate_policy(100, 11), Err(PolicyError::LimitExceeded(_))));
        assert_eq!(generate_policy(20, 5).unwrap().leaf_count(), 100);
    }
}
