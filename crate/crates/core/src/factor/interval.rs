use super::{canonicalize, cell_count, embed_strides, for_each_assignment, offset, union_dims, Factor, FactorError, GroundRv};
use crate::scalar::Scalar;

/// A factor whose cells are only known to lie in `[lo, hi]`.
///
/// All operations are conservative: for any point factors chosen cellwise
/// inside the operands, the point result lies inside the interval result.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalFactor<T> {
    dims: Vec<GroundRv>,
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> IntervalFactor<T> {
    pub fn new(dims: Vec<GroundRv>, lo: Vec<T>, hi: Vec<T>) -> Result<Self, FactorError> {
        let (sorted, lo) = canonicalize(dims.clone(), lo)?;
        let (_, hi) = canonicalize(dims, hi)?;
        if lo.iter().any(|v| *v < T::zero()) {
            return Err(FactorError::Negative);
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(FactorError::Inverted);
        }
        Ok(IntervalFactor { dims: sorted, lo, hi })
    }

    /// Every cell in `[0, 1]`.
    pub fn vacuous(dims: Vec<GroundRv>) -> Self {
        let mut dims = dims;
        dims.sort();
        let n = cell_count(&dims);
        IntervalFactor { dims, lo: vec![T::zero(); n], hi: vec![T::one(); n] }
    }

    pub fn unit() -> Self {
        Self::from_point(&Factor::unit())
    }

    /// Degenerate interval `lo == hi`.
    pub fn from_point(f: &Factor<T>) -> Self {
        IntervalFactor { dims: f.dims().to_vec(), lo: f.values().to_vec(), hi: f.values().to_vec() }
    }

    fn checked(dims: Vec<GroundRv>, lo: Vec<T>, hi: Vec<T>) -> Self {
        debug_assert!(lo.iter().zip(&hi).all(|(l, h)| T::zero() <= *l && l <= h), "malformed interval factor");
        IntervalFactor { dims, lo, hi }
    }

    pub fn dims(&self) -> &[GroundRv] {
        &self.dims
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn contains(&self, rv: &GroundRv) -> bool {
        self.dims.contains(rv)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn multiply(&self, other: &IntervalFactor<T>) -> Result<IntervalFactor<T>, FactorError> {
        let dims = union_dims(&self.dims, &other.dims)?;
        let (sa, sb) = (embed_strides(&self.dims, &dims), embed_strides(&other.dims, &dims));
        let n = cell_count(&dims);
        let (mut lo, mut hi) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for_each_assignment(&dims, |_, a| {
            let (i, j) = (offset(a, &sa), offset(a, &sb));
            // all cells are nonnegative, so endpoints multiply endpoint-wise
            lo.push(self.lo[i] * other.lo[j]);
            hi.push(self.hi[i] * other.hi[j]);
        });
        Ok(Self::checked(dims, lo, hi))
    }

    pub fn marginalize(&self, rv: &GroundRv) -> Result<IntervalFactor<T>, FactorError> {
        self.reduce(rv, T::zero(), T::zero(), |acc, v| acc + v, |acc, v| acc + v)
    }

    /// Removes `rv` by taking `[min lo, max hi]` over its outcomes.
    ///
    /// This absorbs a child whose own conditional table is entirely unknown:
    /// `Σ_v p(v|·) g(v)` with `p(·|·)` ranging over the simplex lies between the
    /// smallest and largest `g(v)`.
    pub fn bound_out(&self, rv: &GroundRv) -> Result<IntervalFactor<T>, FactorError> {
        self.reduce_with_first(rv, |acc, v| acc.min_of(v), |acc, v| acc.max_of(v))
    }

    fn reduce(
        &self,
        rv: &GroundRv,
        lo0: T,
        hi0: T,
        flo: impl Fn(T, T) -> T,
        fhi: impl Fn(T, T) -> T,
    ) -> Result<IntervalFactor<T>, FactorError> {
        let pos = self.dims.iter().position(|x| x == rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let mut dims = self.dims.clone();
        dims.remove(pos);
        let target = embed_strides(&dims, &self.dims);
        let n = cell_count(&dims);
        let (mut lo, mut hi) = (vec![lo0; n], vec![hi0; n]);
        for_each_assignment(&self.dims, |i, a| {
            let j = offset(a, &target);
            lo[j] = flo(lo[j], self.lo[i]);
            hi[j] = fhi(hi[j], self.hi[i]);
        });
        Ok(Self::checked(dims, lo, hi))
    }

    fn reduce_with_first(
        &self,
        rv: &GroundRv,
        flo: impl Fn(T, T) -> T,
        fhi: impl Fn(T, T) -> T,
    ) -> Result<IntervalFactor<T>, FactorError> {
        let pos = self.dims.iter().position(|x| x == rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let mut dims = self.dims.clone();
        dims.remove(pos);
        let target = embed_strides(&dims, &self.dims);
        let n = cell_count(&dims);
        let (mut lo, mut hi): (Vec<Option<T>>, Vec<Option<T>>) = (vec![None; n], vec![None; n]);
        for_each_assignment(&self.dims, |i, a| {
            let j = offset(a, &target);
            lo[j] = Some(lo[j].map_or(self.lo[i], |acc| flo(acc, self.lo[i])));
            hi[j] = Some(hi[j].map_or(self.hi[i], |acc| fhi(acc, self.hi[i])));
        });
        let unwrap = |v: Vec<Option<T>>| v.into_iter().map(|x| x.unwrap_or_else(T::zero)).collect();
        Ok(Self::checked(dims, unwrap(lo), unwrap(hi)))
    }

    pub fn condition(&self, rv: &GroundRv, outcome: &str) -> Result<IntervalFactor<T>, FactorError> {
        let pos = self.dims.iter().position(|x| x == rv).ok_or_else(|| FactorError::MissingDim(rv.to_string()))?;
        let keep = self.dims[pos]
            .outcome_index(outcome)
            .ok_or_else(|| FactorError::UnknownOutcome { rv: rv.to_string(), outcome: outcome.to_owned() })?;
        let (mut lo, mut hi) = (self.lo.clone(), self.hi.clone());
        for_each_assignment(&self.dims, |i, a| {
            if a[pos] != keep {
                lo[i] = T::zero();
                hi[i] = T::zero();
            }
        });
        Ok(Self::checked(self.dims.clone(), lo, hi))
    }

    /// Bounds on the normalized cells: for cell `i`,
    /// `[lo_i / (lo_i + Σ_{j≠i} hi_j), hi_i / (hi_i + Σ_{j≠i} lo_j)]`, clamped to
    /// `[0, 1]`; a `0/0` endpoint becomes the vacuous endpoint.
    pub fn normalize(&self) -> Result<IntervalFactor<T>, FactorError> {
        let others = |v: &[T], i: usize| v.iter().enumerate().filter(|(j, _)| *j != i).fold(T::zero(), |a, (_, b)| a + *b);
        if self.hi.iter().all(|h| *h <= T::zero()) {
            return Err(FactorError::ZeroMass);
        }
        let n = self.lo.len();
        let (mut lo, mut hi) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let (l, h) = (self.lo[i], self.hi[i]);
            let den_lo = l + others(&self.hi, i);
            let den_hi = h + others(&self.lo, i);
            let a = if den_lo > T::zero() { (l / den_lo).clamp_unit() } else { T::zero() };
            let b = if den_hi > T::zero() { (h / den_hi).clamp_unit() } else { T::one() };
            lo.push(a.min_of(b));
            hi.push(b);
        }
        Ok(Self::checked(self.dims.clone(), lo, hi))
    }

    /// True when every cell of `point` lies in the interval, widened by `tol`.
    pub fn encloses(&self, point: &Factor<T>, tol: f64) -> bool {
        self.dims == point.dims()
            && point.values().iter().enumerate().all(|(i, v)| {
                let v = v.to_f64();
                self.lo[i].to_f64() - tol <= v && v <= self.hi[i].to_f64() + tol
            })
    }

    pub fn lower(&self) -> Factor<T> {
        Factor::checked(self.dims.clone(), self.lo.clone())
    }

    pub fn upper(&self) -> Factor<T> {
        Factor::checked(self.dims.clone(), self.hi.clone())
    }

    pub fn to_f64(&self) -> IntervalFactor<f64> {
        IntervalFactor::<f64>::checked(
            self.dims.clone(),
            self.lo.iter().map(|v| v.to_f64()).collect(),
            self.hi.iter().map(|v| v.to_f64()).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{rv, yn};
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool() -> Vec<GroundRv> {
        vec![yn("a"), rv("b", &["X", "Y", "Z"]), yn("c")]
    }

    fn arb_interval() -> impl Strategy<Value = IntervalFactor<f64>> {
        proptest::sample::subsequence(pool(), 0..=3).prop_flat_map(|dims| {
            let n = cell_count(&dims);
            proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), n).prop_map(move |pairs| {
                let lo = pairs.iter().map(|(a, b)| a.min(*b)).collect();
                let hi = pairs.iter().map(|(a, b)| a.max(*b)).collect();
                IntervalFactor::new(dims.clone(), lo, hi).unwrap()
            })
        })
    }

    fn pick(f: &IntervalFactor<f64>, rng: &mut ChaCha8Rng) -> Factor<f64> {
        let vals = f.lo().iter().zip(f.hi()).map(|(l, h)| if h > l { rng.random_range(*l..=*h) } else { *l }).collect();
        Factor::new(f.dims().to_vec(), vals).unwrap()
    }

    #[test]
    fn degenerate_intervals_reproduce_point_ops() {
        let a = Factor::new(vec![yn("a"), yn("c")], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = Factor::new(vec![yn("c")], vec![0.7, 0.3]).unwrap();
        let (ia, ib) = (IntervalFactor::from_point(&a), IntervalFactor::from_point(&b));
        let prod = ia.multiply(&ib).unwrap();
        assert!(prod.is_degenerate());
        assert_eq!(prod.lower(), a.multiply(&b).unwrap());
        let m = prod.marginalize(&yn("c")).unwrap();
        assert_eq!(m.lower(), a.multiply(&b).unwrap().marginalize(&yn("c")).unwrap());
        let n = m.normalize().unwrap();
        let exact = a.multiply(&b).unwrap().marginalize(&yn("c")).unwrap().normalize().unwrap();
        assert!(n.lower().max_abs_diff(&exact).unwrap() < 1e-12);
        assert!(n.upper().max_abs_diff(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn vacuous_table_gives_vacuous_posterior() {
        let post = IntervalFactor::<f64>::vacuous(vec![yn("a")]).normalize().unwrap();
        assert_eq!(post.lo(), &[0.0, 0.0]);
        assert_eq!(post.hi(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_over_zero_is_vacuous_endpoint() {
        let f = IntervalFactor::new(vec![yn("a")], vec![0.0, 0.0], vec![0.0, 0.5]).unwrap();
        let n = f.normalize().unwrap();
        // cell 1 may be zero too, so nothing beyond the vacuous bounds survives
        assert_eq!(n.lo(), &[0.0, 0.0]);
        assert_eq!(n.hi(), &[1.0, 1.0]);
        let g = IntervalFactor::new(vec![yn("a")], vec![0.0, 0.25], vec![0.0, 0.5]).unwrap().normalize().unwrap();
        assert_eq!(g.lo(), &[0.0, 1.0]);
        assert_eq!(g.hi(), &[0.0, 1.0]);
        let z = IntervalFactor::<f64>::new(vec![yn("a")], vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(z.normalize(), Err(FactorError::ZeroMass));
    }

    #[test]
    fn bound_out_brackets_every_mixture() {
        let g = Factor::new(vec![yn("a"), rv("b", &["X", "Y", "Z"])], vec![0.1, 0.5, 0.3, 0.9, 0.2, 0.4]).unwrap();
        let b = IntervalFactor::from_point(&g).bound_out(&rv("b", &["X", "Y", "Z"])).unwrap();
        assert_eq!(b.lo(), &[0.1, 0.2]);
        assert_eq!(b.hi(), &[0.5, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            let p = Factor::new(vec![rv("b", &["X", "Y", "Z"])], w.iter().map(|x| x / s).collect()).unwrap();
            let mix = g.multiply(&p).unwrap().marginalize(&rv("b", &["X", "Y", "Z"])).unwrap();
            assert!(b.encloses(&mix, 1e-12));
        }
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert_eq!(IntervalFactor::new(vec![yn("a")], vec![0.5, 0.1], vec![0.4, 0.2]), Err(FactorError::Inverted));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn operations_enclose_pointwise_selections(f in arb_interval(), g in arb_interval(), seed in any::<u64>()) {
            let prod = f.multiply(&g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let (pf, pg) = (pick(&f, &mut rng), pick(&g, &mut rng));
                let p = pf.multiply(&pg).unwrap();
                prop_assert!(prod.encloses(&p, 1e-12));
                for d in prod.dims().to_vec() {
                    let im = prod.marginalize(&d).unwrap();
                    let pm = p.marginalize(&d).unwrap();
                    prop_assert!(im.encloses(&pm, 1e-12));
                    if let (Ok(inorm), Ok(pnorm)) = (im.normalize(), pm.normalize()) {
                        prop_assert!(inorm.encloses(&pnorm, 1e-12));
                    }
                    let ic = prod.condition(&d, &d.outcomes()[0]).unwrap();
                    prop_assert!(ic.encloses(&p.condition(&d, &d.outcomes()[0]).unwrap(), 0.0));
                }
            }
        }
    }
}
