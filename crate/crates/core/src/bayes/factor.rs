//! Dense factors over discrete variables.

/// A non-negative table over a set of variables.
///
/// `vars` is sorted ascending; `values` is row-major with the last variable
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    fn strides(cards: &[usize]) -> Vec<usize> {
        let mut strides = vec![1; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        strides
    }

    /// Pointwise product over the union of both scopes.
    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        for &v in &other.vars {
            if let Err(pos) = vars.binary_search(&v) {
                vars.insert(pos, v);
            }
        }
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| match self.vars.binary_search(v) {
                Ok(i) => self.cards[i],
                Err(_) => other.cards[other.vars.binary_search(v).unwrap()],
            })
            .collect();
        // stride of each union variable inside each operand (0 when absent)
        let project = |f: &Factor| -> Vec<usize> {
            let strides = Self::strides(&f.cards);
            vars.iter()
                .map(|v| f.vars.binary_search(v).map(|i| strides[i]).unwrap_or(0))
                .collect()
        };
        let (sa, sb) = (project(self), project(other));

        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // odometer increment, last variable fastest
            for k in (0..vars.len()).rev() {
                assignment[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if assignment[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                assignment[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    /// Marginalizes `var` out of the factor.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let outer: usize = self.cards[..pos].iter().product();
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }

    /// Restricts the factor to `var = state`, dropping `var` from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let outer: usize = self.cards[..pos].iter().product();
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor { vars, cards, values }
    }
}
