use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ActivationTerm, ActivationTerms, ProductTerms};
use crate::{Error, Result};

/// Which input derivatives a jet carries.
///
/// Input variables are numbered spatial first, then time: `x = 0, t = 1` in
/// one dimension and `x = 0, y = 1, t = 2` in two.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetOrderSpec {
    pub spatial_dims: usize,
    pub max_spatial_order: usize,
    pub time_first: bool,
    #[serde(default)]
    pub mixed: bool,
    /// Additional components as variable multisets, e.g. `[1, 0]` for `u_tx`.
    #[serde(default)]
    pub extra: Vec<Vec<usize>>,
}

impl JetOrderSpec {
    pub fn one_d(max_spatial_order: usize) -> Self {
        Self {
            spatial_dims: 1,
            max_spatial_order,
            time_first: true,
            mixed: false,
            extra: Vec::new(),
        }
    }

    pub fn two_d(max_spatial_order: usize, mixed: bool) -> Self {
        Self {
            spatial_dims: 2,
            max_spatial_order,
            time_first: true,
            mixed,
            extra: Vec::new(),
        }
    }

    /// Only the value component.
    pub fn value_only(spatial_dims: usize) -> Self {
        Self {
            spatial_dims,
            max_spatial_order: 0,
            time_first: false,
            mixed: false,
            extra: Vec::new(),
        }
    }

    pub fn with_extra(mut self, c: Vec<usize>) -> Self {
        self.extra.push(c);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.spatial_dims + 1
    }

    pub fn time_var(&self) -> usize {
        self.spatial_dims
    }

    pub fn plan(&self) -> Result<JetPlan> {
        let d = self.spatial_dims;
        let limit = match d {
            1 => 3,
            2 => 2,
            _ => return Err(Error::Unsupported(format!("{d} spatial dimensions"))),
        };
        if self.max_spatial_order > limit {
            return Err(Error::Unsupported(format!(
                "spatial order {} in {d}-D (max {limit})",
                self.max_spatial_order
            )));
        }
        if self.mixed && d < 2 {
            return Err(Error::Unsupported("mixed derivatives need two spatial dimensions".into()));
        }
        let mut comps: Vec<Vec<usize>> = vec![vec![]];
        if self.time_first {
            comps.push(vec![d]);
        }
        for v in 0..d {
            for k in 1..=self.max_spatial_order {
                comps.push(vec![v; k]);
            }
        }
        if self.mixed && self.max_spatial_order >= 2 {
            comps.push(vec![0, 1]);
        }
        for e in &self.extra {
            if e.iter().any(|&v| v > d) {
                return Err(Error::InvalidArgument(format!("jet component {e:?} names an unknown variable")));
            }
            let spatial = e.iter().filter(|&&v| v < d).count();
            if e.len() > 3 || spatial > limit {
                return Err(Error::Unsupported(format!("jet component {e:?} in {d}-D")));
            }
            comps.push(e.clone());
        }
        JetPlan::new(d + 1, &comps)
    }
}

/// Closed set of jet components plus the term tables that push jets through
/// activations and products.
#[derive(Debug, Clone)]
pub struct JetPlan {
    nvars: usize,
    components: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    activation: Arc<ActivationTerms>,
    product: Arc<ProductTerms>,
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Every nonempty sub-multiset of `c` (as sorted vectors).
fn sub_multisets(c: &[usize]) -> Vec<Vec<usize>> {
    let n = c.len();
    (1u32..(1 << n))
        .map(|mask| sorted((0..n).filter(|&i| mask & (1 << i) != 0).map(|i| c[i]).collect()))
        .collect()
}

/// Set partitions of `{0, .., n-1}` as lists of blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

impl JetPlan {
    /// Builds the closure of `requested` under taking sub-multisets. Component
    /// 0 is always the value.
    pub fn new(nvars: usize, requested: &[Vec<usize>]) -> Result<Self> {
        let mut set: Vec<Vec<usize>> = vec![vec![]];
        for r in requested {
            if r.iter().any(|&v| v >= nvars) {
                return Err(Error::InvalidArgument(format!("component {r:?} with {nvars} variables")));
            }
            set.push(sorted(r.clone()));
            set.extend(sub_multisets(r));
        }
        set.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        set.dedup();
        let index: HashMap<Vec<usize>, usize> = set.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();

        let mut act_terms = Vec::with_capacity(set.len());
        let mut max_order = 0;
        let mut prod_terms = Vec::with_capacity(set.len());
        for c in &set {
            let mut acc: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
            if c.is_empty() {
                acc.insert((0, vec![]), 1.0);
            } else {
                for part in set_partitions(c.len()) {
                    let mut blocks: Vec<usize> = part
                        .iter()
                        .map(|b| index[&sorted(b.iter().map(|&p| c[p]).collect())])
                        .collect();
                    blocks.sort_unstable();
                    *acc.entry((blocks.len(), blocks)).or_insert(0.0) += 1.0;
                }
            }
            let terms: Vec<ActivationTerm> = acc
                .into_iter()
                .map(|((order, blocks), coef)| ActivationTerm { coef, order, blocks })
                .collect();
            max_order = max_order.max(terms.iter().map(|t| t.order).max().unwrap_or(0));
            act_terms.push(terms);

            let n = c.len();
            let mut pacc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for mask in 0u32..(1 << n) {
                let a: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| c[i]).collect();
                let b: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) == 0).map(|i| c[i]).collect();
                *pacc.entry((index[&sorted(a)], index[&sorted(b)])).or_insert(0.0) += 1.0;
            }
            prod_terms.push(pacc.into_iter().map(|((a, b), k)| (k, a, b)).collect());
        }
        Ok(Self {
            nvars,
            components: set,
            index,
            activation: Arc::new(ActivationTerms {
                terms: act_terms,
                max_order,
            }),
            product: Arc::new(ProductTerms { terms: prod_terms }),
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Index of a component given as a variable multiset in any order.
    pub fn index_of(&self, c: &[usize]) -> Option<usize> {
        self.index.get(&sorted(c.to_vec())).copied()
    }

    pub fn max_order(&self) -> usize {
        self.components.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn activation_terms(&self) -> &Arc<ActivationTerms> {
        &self.activation
    }

    pub fn product_terms(&self) -> &Arc<ProductTerms> {
        &self.product
    }
}
