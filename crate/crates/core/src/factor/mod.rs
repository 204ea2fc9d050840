//! Dense factors over ground random variables: the arithmetic behind the
//! multiply and margin evaluation operators, evidence conditioning, and the
//! interval variant used for bounding partial models.

pub mod interval;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::kb::AltAtom;
use crate::scalar::Scalar;

pub use interval::IntervalFactor;

/// Tolerance for comparing probabilities.
pub const PROB_TOLERANCE: f64 = 1e-9;
/// Tolerance for algebraic identities (sums, fixed points).
pub const ALGEBRA_TOLERANCE: f64 = 1e-12;

/// A ground instance of an alternative-outcome predicate.
///
/// Identity is the predicate plus its ground object arguments; the outcome
/// list rides along in declaration order.
#[derive(Clone, Debug)]
pub struct GroundRv {
    predicate: String,
    args: Vec<String>,
    outcomes: Vec<String>,
}

impl GroundRv {
    pub fn new(predicate: impl Into<String>, args: Vec<String>, outcomes: Vec<String>) -> Self {
        GroundRv { predicate: predicate.into(), args, outcomes }
    }

    /// The random variable named by a ground alternative-outcome atom.
    pub fn from_alt(atom: &AltAtom) -> Option<GroundRv> {
        let args = atom.args.iter().map(|t| t.as_const().map(str::to_owned)).collect::<Option<Vec<_>>>()?;
        Some(GroundRv::new(atom.predicate.clone(), args, atom.outcomes.clone()))
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn cardinality(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome_index(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    fn key(&self) -> (&str, &[String]) {
        (&self.predicate, &self.args)
    }
}

impl PartialEq for GroundRv {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for GroundRv {}

impl Hash for GroundRv {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for GroundRv {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroundRv {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for GroundRv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("`{0}` appears with two different outcome spaces")]
    OutcomeMismatch(String),
    #[error("`{0}` is not a dimension of the factor")]
    MissingDim(String),
    #[error("`{0}` appears twice among the factor dimensions")]
    DuplicateDim(String),
    #[error("`{outcome}` is not an outcome of `{rv}`")]
    UnknownOutcome { rv: String, outcome: String },
    #[error("expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("factor has a negative cell")]
    Negative,
    #[error("lower bound exceeds upper bound")]
    Inverted,
    #[error("factor has zero total mass (inconsistent evidence)")]
    ZeroMass,
}

/// Row-major strides (last dimension fastest).
pub(crate) fn strides(dims: &[GroundRv]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * dims[i + 1].cardinality();
    }
    out
}

pub(crate) fn cell_count(dims: &[GroundRv]) -> usize {
    dims.iter().map(GroundRv::cardinality).product()
}

/// Calls `f(linear, assignment)` for every assignment in row-major order.
pub(crate) fn for_each_assignment(dims: &[GroundRv], mut f: impl FnMut(usize, &[usize])) {
    let cards: Vec<usize> = dims.iter().map(GroundRv::cardinality).collect();
    let mut a = vec![0usize; dims.len()];
    for linear in 0..cell_count(dims) {
        f(linear, &a);
        for d in (0..a.len()).rev() {
            a[d] += 1;
            if a[d] < cards[d] {
                break;
            }
            a[d] = 0;
        }
    }
}

/// Sorted union of two canonical dim lists, with outcome-space agreement check.
pub(crate) fn union_dims(a: &[GroundRv], b: &[GroundRv]) -> Result<Vec<GroundRv>, FactorError> {
    let mut out: Vec<GroundRv> = a.to_vec();
    for rv in b {
        match a.iter().find(|x| *x == rv) {
            Some(x) if x.outcomes != rv.outcomes => return Err(FactorError::OutcomeMismatch(rv.to_string())),
            Some(_) => {}
            None => out.push(rv.clone()),
        }
    }
    out.sort();
    Ok(out)
}

/// Strides of `sub` laid out against `full` (0 where `full` has a dim `sub` lacks).
pub(crate) fn embed_strides(sub: &[GroundRv], full: &[GroundRv]) -> Vec<usize> {
    let s = strides(sub);
    full.iter().map(|rv| sub.iter().position(|x| x == rv).map_or(0, |i| s[i])).collect()
}

pub(crate) fn offset(assignment: &[usize], strides: &[usize]) -> usize {
    assignment.iter().zip(strides).map(|(a, s)| a * s).sum()
}

/// Canonicalizes dims, permuting a row-major value vector to match.
pub(crate) fn canonicalize<T: Copy>(dims: Vec<GroundRv>, values: Vec<T>) -> Result<(Vec<GroundRv>, Vec<T>), FactorError> {
    let expected = cell_count(&dims);
    if values.len() != expected {
        return Err(FactorError::Shape { expected, got: values.len() });
    }
    for (i, d) in dims.iter().enumerate() {
        if dims[..i].contains(d) {
            return Err(FactorError::DuplicateDim(d.to_string()));
        }
    }
    let mut sorted = dims.clone();
    sorted.sort();
    if sorted == dims {
        return Ok((dims, values));
    }
    let src = embed_strides(&dims, &sorted);
    let mut out = Vec::with_capacity(values.len());
    for_each_assignment(&sorted, |_, a| out.push(values[offset(a, &src)]));
    Ok((sorted, out))
}

/// A nonnegative table over the joint outcomes of its dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor<T> {
    dims: Vec<GroundRv>,
    values: Vec<T>,
}

impl<T: Scalar> Factor<T> {
    /// Builds a factor from row-major values laid out in the given dim order.
    pub fn new(dims: Vec<GroundRv>, values: Vec<T>) -> Result<Self, FactorError> {
        let (dims, values) = canonicalize(dims, values)?;
        if values.iter().any(|v| *v < T::zero()) {
            return Err(FactorError::Negative);
        }
        Ok(Factor { dims, values })
    }

    /// Builds a factor by evaluating `f` on every assignment of `dims` (given order).
    pub fn from_fn(dims: Vec<GroundRv>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self, FactorError> {
        let mut values = Vec::with_capacity(cell_count(&dims));
        for_each_assignment(&dims, |_, a| values.push(f(a)));
        Self::new(dims, values)
    }

    /// The multiplicative identity: no dims, one cell equal to one.
    pub fn unit() -> Self {
        Factor { dims: Vec::new(), values: vec![T::one()] }
    }

    pub fn scalar(value: T) -> Self {
        Factor { dims: Vec::new(), values: vec![value] }
    }

    fn checked(dims: Vec<GroundRv>, values: Vec<T>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= T::zero()), "negative factor cell");
        Factor { dims, values }
    }

    pub fn dims(&self) -> &[GroundRv] {
        &self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, rv: &GroundRv) -> bool {
        self.dims.contains(rv)
    }

    /// Cell at an assignment given as outcome indices in canonical dim order.
    pub fn get(&self, assignment: &[usize]) -> T {
        self.values[offset(assignment, &strides(&self.dims))]
    }

    /// Cell at an assignment given by outcome names, in any dim order.
    pub fn value_of(&self, assignment: &[(&GroundRv, &str)]) -> Option<T> {
        let mut idx = vec![0; self.dims.len()];
        for (rv, o) in assignment {
            let d = self.dims.iter().position(|x| x == *rv)?;
            idx[d] = rv.outcome_index(o)?;
        }
        Some(self.get(&idx))
    }

    pub fn sum(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + *v)
    }

    /// Pointwise product over the union of dimensions.
    pub fn multiply(&self, other: &Factor<T>) -> Result<Factor<T>, FactorError> {
        let dims = union_dims(&self.dims, &other.dims)?;
        let (sa, sb) = (embed_strides(&self.dims, &dims), embed_strides(&other.dims, &dims));
        let mut values = Vec::with_capacity(cell_count(&dims));
        for_each_assignment(&dims, |_, a| values.push(self.values[offset(a, &sa)] * other.values[offset(a, &sb)]));
        Ok(Self::checked(dims, values))
    }

    /// Sums `rv` out.
    pub fn marginalize(&self, rv: &GroundRv) -> Result<Factor<T>, FactorError> {
        let pos = self.dims.iter().position(|x| x == rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let mut dims = self.dims.clone();
        dims.remove(pos);
        let target = embed_strides(&dims, &self.dims);
        let mut values = vec![T::zero(); cell_count(&dims)];
        for_each_assignment(&self.dims, |i, a| {
            let j = offset(a, &target);
            values[j] = values[j] + self.values[i];
        });
        Ok(Self::checked(dims, values))
    }

    /// Zeroes every cell where `rv` differs from `outcome`.
    pub fn condition(&self, rv: &GroundRv, outcome: &str) -> Result<Factor<T>, FactorError> {
        let pos = self.dims.iter().position(|x| x == rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let keep = self.dims[pos]
            .outcome_index(outcome)
            .ok_or_else(|| FactorError::UnknownOutcome { rv: rv.to_string(), outcome: outcome.to_owned() })?;
        let mut values = self.values.clone();
        for_each_assignment(&self.dims, |i, a| {
            if a[pos] != keep {
                values[i] = T::zero();
            }
        });
        Ok(Self::checked(self.dims.clone(), values))
    }

    /// Divides by the total mass.
    pub fn normalize(&self) -> Result<Factor<T>, FactorError> {
        let total = self.sum();
        if total <= T::zero() {
            return Err(FactorError::ZeroMass);
        }
        Ok(Self::checked(self.dims.clone(), self.values.iter().map(|v| *v / total).collect()))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Factor<U> {
        Factor::<U>::checked(self.dims.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn to_f64(&self) -> Factor<f64> {
        self.map(T::to_f64)
    }

    /// Largest absolute cellwise difference; `None` when the dims differ.
    pub fn max_abs_diff(&self, other: &Factor<T>) -> Option<f64> {
        (self.dims == other.dims).then(|| {
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Multiplies all factors together.
pub fn product<T: Scalar>(factors: &[Factor<T>]) -> Result<Factor<T>, FactorError> {
    factors.iter().try_fold(Factor::unit(), |acc, f| acc.multiply(f))
}

/// Variable elimination: sums out every variable not in `keep`, choosing at
/// each step the variable whose bucket product has the fewest cells.
pub fn eliminate<T: Scalar>(factors: Vec<Factor<T>>, keep: &[GroundRv]) -> Result<Factor<T>, FactorError> {
    let mut factors = factors;
    loop {
        let mut candidates: Vec<GroundRv> = factors.iter().flat_map(|f| f.dims().iter().cloned()).collect();
        candidates.sort();
        candidates.dedup();
        candidates.retain(|rv| !keep.contains(rv));
        let best = candidates.into_iter().min_by_key(|rv| {
            let bucket: Vec<&Factor<T>> = factors.iter().filter(|f| f.contains(rv)).collect();
            let mut dims: Vec<GroundRv> = Vec::new();
            for f in bucket {
                for d in f.dims() {
                    if !dims.contains(d) {
                        dims.push(d.clone());
                    }
                }
            }
            cell_count(&dims)
        });
        let Some(rv) = best else { break };
        factors = eliminate_one(factors, &rv)?;
    }
    product(&factors)
}

/// Variable elimination in a caller-given order; variables not listed stay.
pub fn eliminate_in_order<T: Scalar>(factors: Vec<Factor<T>>, order: &[GroundRv]) -> Result<Factor<T>, FactorError> {
    let mut factors = factors;
    for rv in order {
        factors = eliminate_one(factors, rv)?;
    }
    product(&factors)
}

fn eliminate_one<T: Scalar>(factors: Vec<Factor<T>>, rv: &GroundRv) -> Result<Vec<Factor<T>>, FactorError> {
    let (bucket, mut rest): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.contains(rv));
    if !bucket.is_empty() {
        rest.push(product(&bucket)?.marginalize(rv)?);
    }
    Ok(rest)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn rv(name: &str, outcomes: &[&str]) -> GroundRv {
        GroundRv::new(name, vec!["SAM".into()], outcomes.iter().map(|s| s.to_string()).collect())
    }

    pub fn yn(name: &str) -> GroundRv {
        rv(name, &["YES", "NO"])
    }

    fn coma_cpt() -> Factor<f64> {
        // dims in written order: coma, tumor, calcium
        let calcium = rv("calcium", &["BAD", "GOOD"]);
        let table = [[[0.8, 0.8], [0.8, 0.05]], [[0.2, 0.2], [0.2, 0.95]]];
        Factor::from_fn(vec![yn("coma"), yn("tumor"), calcium], |a| table[a[0]][a[1]][a[2]]).unwrap()
    }

    #[test]
    fn dims_are_canonical() {
        let f = coma_cpt();
        let names: Vec<_> = f.dims().iter().map(|d| d.predicate().to_owned()).collect();
        assert_eq!(names, vec!["calcium", "coma", "tumor"]);
        let calcium = rv("calcium", &["BAD", "GOOD"]);
        let (coma, tumor) = (yn("coma"), yn("tumor"));
        assert_eq!(f.value_of(&[(&coma, "YES"), (&tumor, "NO"), (&calcium, "GOOD")]), Some(0.05));
        assert_eq!(f.value_of(&[(&tumor, "NO"), (&calcium, "BAD"), (&coma, "NO")]), Some(0.2));
    }

    #[test]
    fn multiply_by_unit_is_identity() {
        let f = coma_cpt();
        assert_eq!(f.multiply(&Factor::unit()).unwrap(), f);
        assert_eq!(Factor::unit().multiply(&f).unwrap(), f);
    }

    #[test]
    fn multiply_prior_into_coma_table() {
        let tumor = yn("tumor");
        let prior = Factor::new(vec![tumor.clone()], vec![0.2, 0.8]).unwrap();
        let joint = prior.multiply(&coma_cpt()).unwrap();
        let calcium = rv("calcium", &["BAD", "GOOD"]);
        let coma = yn("coma");
        let cell = joint.value_of(&[(&tumor, "YES"), (&calcium, "BAD"), (&coma, "YES")]).unwrap();
        assert!((cell - 0.16).abs() < ALGEBRA_TOLERANCE);
    }

    #[test]
    fn multiply_rejects_outcome_mismatch() {
        let a = Factor::new(vec![yn("t")], vec![0.5, 0.5]).unwrap();
        let b = Factor::new(vec![rv("t", &["Y", "N"])], vec![0.5, 0.5]).unwrap();
        assert!(matches!(a.multiply(&b), Err(FactorError::OutcomeMismatch(_))));
    }

    #[test]
    fn marginalizing_the_child_of_a_cpt_gives_ones() {
        let m = coma_cpt().marginalize(&yn("coma")).unwrap();
        assert_eq!(m.dims().len(), 2);
        for v in m.values() {
            assert!((v - 1.0).abs() < ALGEBRA_TOLERANCE);
        }
        assert!(matches!(m.marginalize(&yn("coma")), Err(FactorError::MissingDim(_))));
    }

    #[test]
    fn condition_keeps_the_observed_column() {
        let coma = yn("coma");
        let f = coma_cpt().condition(&coma, "YES").unwrap();
        let calcium = rv("calcium", &["BAD", "GOOD"]);
        let tumor = yn("tumor");
        let mut yes = Vec::new();
        for t in ["YES", "NO"] {
            for c in ["BAD", "GOOD"] {
                yes.push(f.value_of(&[(&coma, "YES"), (&tumor, t), (&calcium, c)]).unwrap());
                assert_eq!(f.value_of(&[(&coma, "NO"), (&tumor, t), (&calcium, c)]), Some(0.0));
            }
        }
        assert_eq!(yes, vec![0.8, 0.8, 0.8, 0.05]);
        assert_eq!(f.condition(&coma, "YES").unwrap(), f);
        assert!(matches!(f.condition(&coma, "MAYBE"), Err(FactorError::UnknownOutcome { .. })));
        // condition then sum out == select the slice
        let slice = f.marginalize(&coma).unwrap();
        for t in ["YES", "NO"] {
            for c in ["BAD", "GOOD"] {
                let a = slice.value_of(&[(&tumor, t), (&calcium, c)]).unwrap();
                let b = coma_cpt().value_of(&[(&coma, "YES"), (&tumor, t), (&calcium, c)]).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn normalize_worked_example_mass() {
        let cancer = yn("cancer");
        let f = Factor::<f64>::new(vec![cancer], vec![0.088, 0.1168]).unwrap().normalize().unwrap();
        assert!((f.values()[0] - 0.4296875).abs() < ALGEBRA_TOLERANCE);
        assert!((f.values()[1] - 0.5703125).abs() < ALGEBRA_TOLERANCE);
        let again = f.normalize().unwrap();
        assert!(again.max_abs_diff(&f).unwrap() < ALGEBRA_TOLERANCE);
        let zero = Factor::new(vec![yn("x")], vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.normalize(), Err(FactorError::ZeroMass));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Factor::new(vec![yn("a")], vec![1.0]), Err(FactorError::Shape { .. })));
        assert!(matches!(Factor::new(vec![yn("a")], vec![1.0, -0.1]), Err(FactorError::Negative)));
        assert!(matches!(Factor::new(vec![yn("a"), yn("a")], vec![1.0; 4]), Err(FactorError::DuplicateDim(_))));
    }

    #[test]
    fn rational_factors_are_exact() {
        use num_rational::Rational64;
        let f = Factor::new(vec![yn("c")], vec![Rational64::new(11, 125), Rational64::new(73, 625)]).unwrap();
        let n = f.normalize().unwrap();
        assert_eq!(n.values()[0], Rational64::new(55, 128));
    }

    pub fn arb_factor(pool: Vec<GroundRv>) -> impl Strategy<Value = Factor<f64>> {
        proptest::sample::subsequence(pool.clone(), 0..=pool.len()).prop_flat_map(|dims| {
            let n = cell_count(&dims);
            proptest::collection::vec(0.0f64..1.0, n).prop_map(move |vals| Factor::new(dims.clone(), vals).unwrap())
        })
    }

    fn pool() -> Vec<GroundRv> {
        vec![yn("a"), rv("b", &["X", "Y", "Z"]), yn("c"), rv("d", &["P", "Q"])]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn multiply_commutes(f in arb_factor(pool()), g in arb_factor(pool())) {
            let fg = f.multiply(&g).unwrap();
            let gf = g.multiply(&f).unwrap();
            prop_assert_eq!(fg.dims(), gf.dims());
            prop_assert!(fg.max_abs_diff(&gf).unwrap() < ALGEBRA_TOLERANCE);
        }

        #[test]
        fn multiply_associates(f in arb_factor(pool()), g in arb_factor(pool()), h in arb_factor(pool())) {
            let a = f.multiply(&g).unwrap().multiply(&h).unwrap();
            let b = f.multiply(&g.multiply(&h).unwrap()).unwrap();
            prop_assert!(a.max_abs_diff(&b).unwrap() < ALGEBRA_TOLERANCE);
        }

        #[test]
        fn marginalization_commutes_and_preserves_mass(f in arb_factor(pool())) {
            let dims = f.dims().to_vec();
            for v in &dims {
                let m = f.marginalize(v).unwrap();
                prop_assert!((m.sum() - f.sum()).abs() < ALGEBRA_TOLERANCE);
                for w in &dims {
                    if w != v {
                        let vw = m.marginalize(w).unwrap();
                        let wv = f.marginalize(w).unwrap().marginalize(v).unwrap();
                        prop_assert!(vw.max_abs_diff(&wv).unwrap() < ALGEBRA_TOLERANCE);
                    }
                }
            }
        }

        #[test]
        fn elimination_order_does_not_matter(fs in proptest::collection::vec(arb_factor(pool()), 1..4), seed in any::<u64>()) {
            let keep = vec![yn("a")];
            let all: Vec<GroundRv> = pool().into_iter().filter(|r| !keep.contains(r)).collect();
            let mut order = all.clone();
            // cheap deterministic shuffle
            let n = order.len();
            for i in 0..n {
                order.swap(i, (seed as usize).wrapping_add(i * 7) % n);
            }
            let a = eliminate(fs.clone(), &keep).unwrap();
            let b = eliminate_in_order(fs, &order).unwrap();
            prop_assert_eq!(a.dims(), b.dims());
            if a.sum() > 1e-6 {
                let (na, nb) = (a.normalize().unwrap(), b.normalize().unwrap());
                prop_assert!(na.max_abs_diff(&nb).unwrap() < PROB_TOLERANCE);
            }
        }
    }
}
