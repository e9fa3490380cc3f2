use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// An affine expression `Σ coef·x[index] + constant` over program variables.
///
/// Terms are kept as an unsorted list; repeated indices are summed when the
/// expression is lowered into a solver row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize) -> Self {
        Affine {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(index: usize, coef: f64) -> Self {
        Affine {
            terms: vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, index: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
        self
    }

    pub fn with_term(mut self, index: usize, coef: f64) -> Self {
        self.add_term(index, coef);
        self
    }

    pub fn add_scaled(&mut self, other: &Affine, scale: f64) -> &mut Self {
        for &(i, c) in &other.terms {
            self.add_term(i, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    /// Merges duplicate indices and drops zero coefficients, sorted by index.
    pub fn compacted(&self) -> Vec<(usize, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        out
    }
}

impl From<f64> for Affine {
    fn from(value: f64) -> Self {
        Affine::constant(value)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Add<f64> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: f64) -> Affine {
        self.constant += rhs;
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: Affine) -> Affine {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Sub<f64> for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: f64) -> Affine {
        self.constant -= rhs;
        self
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, rhs: Affine) {
        self.add_scaled(&rhs, 1.0);
    }
}

impl AddAssign<&Affine> for Affine {
    fn add_assign(&mut self, rhs: &Affine) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign for Affine {
    fn sub_assign(&mut self, rhs: Affine) {
        self.add_scaled(&rhs, -1.0);
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        self.scaled(rhs)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compaction_merges_and_drops() {
        let a = Affine::var(2) + Affine::term(0, 3.0) + Affine::term(2, -1.0);
        assert_eq!(a.compacted(), vec![(0, 3.0)]);
    }

    #[test]
    fn eval_includes_constant() {
        let a = (Affine::term(1, 2.0) + 1.5) * 2.0;
        assert_eq!(a.eval(&[10.0, 3.0]), 15.0);
    }
}
