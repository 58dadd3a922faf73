use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::{Base, ModuleElement};
use crate::error::{Error, Result};

/// Digit choice when several digits match in a nonstandard system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Policy {
    #[default]
    FirstMatch,
    StopOnBranch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ExpansionStatus {
    Finite,
    EventuallyPeriodic { preperiod: usize, period: usize },
    Truncated,
    Stuck,
    Branching,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expansion {
    /// Digit indices d₀, d₁, … into the digit list.
    pub digits: Vec<usize>,
    #[serde(flatten)]
    pub status: ExpansionStatus,
    /// x_k after the last emitted digit.
    pub remainder: ModuleElement,
}

#[derive(Clone, Debug, Serialize)]
pub struct Exploration {
    pub reached_zero: bool,
    pub shortest_finite: Option<Vec<usize>>,
    pub states_visited: usize,
    pub breadth_limited: bool,
    pub steps: usize,
}

/// (A, D) with D ⊂ Zⁿ[A], |D| = a and 0 ∈ D.
#[derive(Clone, Debug)]
pub struct DigitSystem {
    base: Arc<Base>,
    digits: Vec<ModuleElement>,
    values: Vec<Vec<BigRational>>,
    classes: Vec<usize>,
    by_class: HashMap<usize, Vec<usize>>,
    standard: bool,
}

impl DigitSystem {
    pub fn new(base: Arc<Base>, digits: Vec<ModuleElement>) -> Result<Self> {
        if BigInt::from(digits.len()) != base.counts.a {
            return Err(Error::DigitCount { expected: base.counts.a.to_string(), found: digits.len() });
        }
        Self::unchecked(base, digits)
    }

    /// Skip the |D| = a check (degenerate experiments such as repeated digits).
    pub fn unchecked(base: Arc<Base>, digits: Vec<ModuleElement>) -> Result<Self> {
        let digits = digits
            .into_iter()
            .map(|d| {
                if d.dim() != base.n {
                    return Err(Error::DimensionMismatch { expected: base.n, found: d.dim() });
                }
                base.polynomial_form(&d)
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<Vec<BigRational>> = digits.iter().map(|d| base.value(d)).collect();
        if !values.iter().any(|v| v.iter().all(|x| x.is_zero())) {
            return Err(Error::MissingZeroDigit);
        }
        let classes: Vec<usize> = digits.iter().map(|d| base.residues_a.class_of(&d.coeff(0))).collect();
        let mut by_class: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            by_class.entry(*c).or_default().push(i);
        }
        let standard = classes.iter().collect::<HashSet<_>>().len() == classes.len() && BigInt::from(classes.len()) == base.counts.a;
        Ok(DigitSystem { base, digits, values, classes, by_class, standard })
    }

    /// Standard system whose digits are the A-side residues.
    pub fn standard_residues(base: Arc<Base>) -> Result<Self> {
        let digits = base.residues_a.representatives.iter().map(|r| ModuleElement::from_vector(r.clone())).collect();
        Self::new(base, digits)
    }

    pub fn base(&self) -> &Arc<Base> {
        &self.base
    }

    pub fn digits(&self) -> &[ModuleElement] {
        &self.digits
    }

    pub fn digit_values(&self) -> &[Vec<BigRational>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digits pairwise incongruent modulo A Zⁿ[A].
    pub fn is_standard(&self) -> bool {
        self.standard
    }

    /// Residue class (A-side) of each digit.
    pub fn digit_classes(&self) -> &[usize] {
        &self.classes
    }

    /// All (d, x') with x = d + A x'.
    pub fn expand_step(&self, x: &ModuleElement) -> Result<Vec<(usize, ModuleElement)>> {
        let x = self.base.polynomial_form(x)?;
        let c = self.base.residues_a.class_of(&x.coeff(0));
        let Some(cands) = self.by_class.get(&c) else { return Ok(Vec::new()) };
        cands
            .iter()
            .map(|&i| {
                let w = x.sub(&self.digits[i]);
                let next = self
                    .base
                    .divide_by_a(&w)
                    .ok_or_else(|| Error::invariant("kernel member without A-decomposition"))?;
                Ok((i, next))
            })
            .collect()
    }

    pub fn expand(&self, x: &ModuleElement, max_steps: usize, policy: Policy) -> Result<Expansion> {
        let mut x = self.base.polynomial_form(x)?;
        let mut digits = Vec::new();
        let mut seen: HashMap<Vec<BigRational>, usize> = HashMap::new();
        for step in 0..max_steps {
            if x.is_zero() || self.base.value(&x).iter().all(|v| v.is_zero()) {
                return Ok(Expansion { digits, status: ExpansionStatus::Finite, remainder: ModuleElement::zero(self.base.n) });
            }
            let key = self.base.value(&x);
            if let Some(&first) = seen.get(&key) {
                let status = ExpansionStatus::EventuallyPeriodic { preperiod: first, period: step - first };
                return Ok(Expansion { digits, status, remainder: x });
            }
            seen.insert(key, step);
            let mut opts = self.expand_step(&x)?;
            if opts.is_empty() {
                return Ok(Expansion { digits, status: ExpansionStatus::Stuck, remainder: x });
            }
            if opts.len() > 1 && policy == Policy::StopOnBranch {
                return Ok(Expansion { digits, status: ExpansionStatus::Branching, remainder: x });
            }
            let (d, next) = opts.swap_remove(0);
            digits.push(d);
            x = next;
        }
        let status = if x.is_zero() { ExpansionStatus::Finite } else { ExpansionStatus::Truncated };
        Ok(Expansion { digits, status, remainder: x })
    }

    /// Breadth-first search over all digit choices, keeping at most `max_breadth` states per level.
    pub fn explore(&self, x: &ModuleElement, max_steps: usize, max_breadth: usize) -> Result<Exploration> {
        let start = self.base.polynomial_form(x)?;
        let mut layer: Vec<(ModuleElement, Vec<usize>)> = vec![(start, Vec::new())];
        let mut seen: HashSet<Vec<BigRational>> = HashSet::new();
        let mut limited = false;
        let mut visited = 0;
        for step in 0..=max_steps {
            let mut next = Vec::new();
            for (x, path) in layer {
                let v = self.base.value(&x);
                if v.iter().all(|c| c.is_zero()) {
                    return Ok(Exploration { reached_zero: true, shortest_finite: Some(path), states_visited: visited, breadth_limited: limited, steps: step });
                }
                if !seen.insert(v) {
                    continue;
                }
                visited += 1;
                if step == max_steps {
                    continue;
                }
                for (d, nx) in self.expand_step(&x)? {
                    let mut p = path.clone();
                    p.push(d);
                    next.push((nx, p));
                }
            }
            if next.len() > max_breadth {
                next.truncate(max_breadth);
                limited = true;
            }
            if next.is_empty() {
                return Ok(Exploration { reached_zero: false, shortest_finite: None, states_visited: visited, breadth_limited: limited, steps: step });
            }
            layer = next;
        }
        Ok(Exploration { reached_zero: false, shortest_finite: None, states_visited: visited, breadth_limited: limited, steps: max_steps })
    }

    /// Σ A^j d_{i_j} for a digit index string.
    pub fn evaluate_digits(&self, idx: &[usize]) -> ModuleElement {
        idx.iter()
            .enumerate()
            .fold(ModuleElement::zero(self.base.n), |acc, (j, &i)| acc.add(&self.digits[i].shift(j as i64)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactq::scalar::{int, rat};
    use crate::exactq::Matrix;

    fn iv(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| int(x)).collect()
    }

    fn paper_digits(tilde: bool) -> Vec<ModuleElement> {
        let lead = if tilde { 2 } else { 1 };
        let mut d = Vec::new();
        for first in [0, lead] {
            for second in [0, 1, 2, 3, 9] {
                d.push(ModuleElement::from_i64(&[first, second]));
            }
        }
        d
    }

    fn example_base() -> Arc<Base> {
        Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(0, 1), rat(5, 3)]])).unwrap())
    }

    #[test]
    fn standard_and_nonstandard() {
        let base = example_base();
        assert!(DigitSystem::new(base.clone(), paper_digits(false)).unwrap().is_standard());
        assert!(!DigitSystem::new(base.clone(), paper_digits(true)).unwrap().is_standard());
        assert!(DigitSystem::standard_residues(base).unwrap().is_standard());
    }

    #[test]
    fn expand_step_example() {
        let base = example_base();
        let sys = DigitSystem::new(base.clone(), paper_digits(false)).unwrap();
        let steps = sys.expand_step(&ModuleElement::from_i64(&[0, 4])).unwrap();
        assert_eq!(steps.len(), 1);
        let (d, next) = &steps[0];
        assert_eq!(sys.digits()[*d], ModuleElement::from_i64(&[1, 9]));
        assert_eq!(base.value(next), vec![rat(1, 1), rat(-3, 1)]);
        let zero = sys.expand(&ModuleElement::zero(2), 10, Policy::FirstMatch).unwrap();
        assert_eq!((zero.digits.len(), zero.status), (0, ExpansionStatus::Finite));
    }

    #[test]
    fn one_dimensional_expansion() {
        let base = Arc::new(Base::new(Matrix::from_rows(vec![vec![rat(3, 2)]])).unwrap());
        let sys = DigitSystem::new(base.clone(), (0..3).map(|d| ModuleElement::from_i64(&[d])).collect()).unwrap();
        let e = sys.expand(&ModuleElement::from_i64(&[4]), 64, Policy::FirstMatch).unwrap();
        assert_eq!(e.status, ExpansionStatus::Finite);
        let back = sys.evaluate_digits(&e.digits);
        assert_eq!(base.value(&back), vec![rat(4, 1)]);
        assert!(sys.expand_step(&ModuleElement::term(0, iv(&[7]))).unwrap().len() == 1);
    }

    #[test]
    fn size_and_zero_checks() {
        let base = example_base();
        let mut d = paper_digits(false);
        d.pop();
        assert!(matches!(DigitSystem::new(base.clone(), d), Err(Error::DigitCount { .. })));
        let nz: Vec<ModuleElement> = (1..=10).map(|i| ModuleElement::from_i64(&[0, i])).collect();
        assert_eq!(DigitSystem::new(base, nz).unwrap_err(), Error::MissingZeroDigit);
    }
}
