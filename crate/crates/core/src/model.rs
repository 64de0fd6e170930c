//! Subjects, cost tables, patterns and decision lists.
//!
//! A decision list routes a subject through its rules in order; the first
//! rule whose pattern the subject satisfies fixes the treatment, and a
//! subject matching nothing falls through to the default. Everything the
//! subject had to be measured on along the way is charged once per feature.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Largest feature count a [`FeatureMask`] can hold.
pub const MAX_FEATURES: usize = 128;

/// Set of feature indices, one bit per feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureMask(pub u128);

impl FeatureMask {
    pub const EMPTY: FeatureMask = FeatureMask(0);

    pub fn single(feature: usize) -> Self {
        debug_assert!(feature < MAX_FEATURES);
        FeatureMask(1u128 << feature)
    }

    pub fn insert(&mut self, feature: usize) {
        self.0 |= 1u128 << feature;
    }

    pub fn contains(self, feature: usize) -> bool {
        feature < MAX_FEATURES && self.0 & (1u128 << feature) != 0
    }

    pub fn union(self, other: Self) -> Self {
        FeatureMask(self.0 | other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        FeatureMask(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Feature indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let f = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(f)
        })
    }
}

impl FromIterator<usize> for FeatureMask {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut mask = FeatureMask::EMPTY;
        for f in iter {
            mask.insert(f);
        }
        mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Categorical,
    Numeric,
}

/// Name, kind and value domain of one characteristic.
///
/// Binary and categorical features carry their level labels; a stored
/// [`Value::Level`] indexes into `levels`. Numeric features have no levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub levels: Vec<String>,
}

impl FeatureDescriptor {
    pub fn binary(name: impl Into<String>) -> Self {
        FeatureDescriptor {
            name: name.into(),
            kind: FeatureKind::Binary,
            levels: vec!["0".into(), "1".into()],
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        FeatureDescriptor {
            name: name.into(),
            kind: FeatureKind::Categorical,
            levels,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureDescriptor {
            name: name.into(),
            kind: FeatureKind::Numeric,
            levels: Vec::new(),
        }
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

/// The characteristics `F` together with the assessment cost function `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace<T> {
    features: Vec<FeatureDescriptor>,
    costs: Vec<T>,
}

impl<T: Scalar> FeatureSpace<T> {
    pub fn new(features: Vec<FeatureDescriptor>, costs: Vec<T>) -> Result<Self> {
        if features.len() > MAX_FEATURES {
            return Err(Error::TooManyFeatures { max: MAX_FEATURES, got: features.len() });
        }
        if features.len() != costs.len() {
            return Err(Error::Config(format!(
                "{} features but {} costs",
                features.len(),
                costs.len()
            )));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
            if !(costs[i] >= T::zero()) {
                return Err(Error::InvalidCost(f.name.clone()));
            }
            match f.kind {
                FeatureKind::Binary if f.levels.len() != 2 => {
                    return Err(Error::Config(format!(
                        "binary feature '{}' needs exactly two levels",
                        f.name
                    )))
                }
                FeatureKind::Categorical if f.levels.is_empty() => {
                    return Err(Error::EmptyDomain(f.name.clone()))
                }
                _ => {}
            }
        }
        Ok(FeatureSpace { features, costs })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn descriptor(&self, feature: usize) -> &FeatureDescriptor {
        &self.features[feature]
    }

    pub fn cost(&self, feature: usize) -> T {
        self.costs[feature]
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Sum of `d` over the features in `mask`, in increasing feature order.
    pub fn mask_cost(&self, mask: FeatureMask) -> T {
        scalar::sum(mask.iter().map(|f| self.costs[f]))
    }

    /// Checks that a feature vector conforms to this space.
    pub fn check_vector(&self, x: &[Value]) -> std::result::Result<(), String> {
        if x.len() != self.features.len() {
            return Err(format!("expected {} features, got {}", self.features.len(), x.len()));
        }
        for (f, (desc, v)) in self.features.iter().zip(x).enumerate() {
            match (desc.kind, v) {
                (FeatureKind::Numeric, Value::Number(n)) if n.is_finite() => {}
                (FeatureKind::Numeric, _) => {
                    return Err(format!("feature {f} ('{}') needs a finite number", desc.name))
                }
                (_, Value::Level(l)) if (*l as usize) < desc.levels.len() => {}
                (_, _) => {
                    return Err(format!("feature {f} ('{}') needs a level in its domain", desc.name))
                }
            }
        }
        Ok(())
    }
}

/// Index of a treatment in its [`TreatmentSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentId(pub usize);

impl fmt::Display for TreatmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The treatments `A` together with the treatment cost function `d'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpace<T> {
    names: Vec<String>,
    costs: Vec<T>,
}

impl<T: Scalar> TreatmentSpace<T> {
    pub fn new(names: Vec<String>, costs: Vec<T>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::NoTreatments);
        }
        if names.len() != costs.len() {
            return Err(Error::Config(format!(
                "{} treatments but {} costs",
                names.len(),
                costs.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateTreatment(name.clone()));
            }
            if !(costs[i] >= T::zero()) {
                return Err(Error::InvalidCost(name.clone()));
            }
        }
        Ok(TreatmentSpace { names, costs })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = TreatmentId> {
        (0..self.names.len()).map(TreatmentId)
    }

    pub fn name(&self, t: TreatmentId) -> &str {
        &self.names[t.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cost(&self, t: TreatmentId) -> T {
        self.costs[t.0]
    }

    pub fn costs(&self) -> &[T] {
        &self.costs
    }

    pub fn id_of(&self, name: &str) -> Option<TreatmentId> {
        self.names.iter().position(|n| n == name).map(TreatmentId)
    }

    pub fn contains(&self, t: TreatmentId) -> bool {
        t.0 < self.names.len()
    }
}

/// A stored characteristic value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    /// Level index of a binary or categorical feature.
    Level(u32),
    Number(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord<T> {
    pub x: Vec<Value>,
    pub treatment: TreatmentId,
    pub outcome: T,
}

/// Observational data `D` with its cost tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    features: FeatureSpace<T>,
    treatments: TreatmentSpace<T>,
    records: Vec<SubjectRecord<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: FeatureSpace<T>,
        treatments: TreatmentSpace<T>,
        records: Vec<SubjectRecord<T>>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            features
                .check_vector(&r.x)
                .map_err(|reason| Error::InvalidRecord { record: i, reason })?;
            if !treatments.contains(r.treatment) {
                return Err(Error::InvalidRecord {
                    record: i,
                    reason: format!("unknown treatment {}", r.treatment),
                });
            }
        }
        Ok(Dataset { features, treatments, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn features(&self) -> &FeatureSpace<T> {
        &self.features
    }

    pub fn treatments(&self) -> &TreatmentSpace<T> {
        &self.treatments
    }

    pub fn records(&self) -> &[SubjectRecord<T>] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &SubjectRecord<T> {
        &self.records[i]
    }

    /// The records at `indices`, in that order, with the same spaces.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::new(self.features.clone(), self.treatments.clone(), records)
    }

    /// Number of records observed under each treatment.
    pub fn treatment_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.treatments.len()];
        for r in &self.records {
            counts[r.treatment.0] += 1;
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl Operator {
    pub fn is_ordering(self) -> bool {
        !matches!(self, Operator::Eq | Operator::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Eq => "=",
            Operator::Ne => "!=",
            Operator::Le => "<=",
            Operator::Ge => ">=",
            Operator::Lt => "<",
            Operator::Gt => ">",
        }
    }

    pub fn parse(symbol: &str) -> Option<Self> {
        Some(match symbol {
            "=" | "==" => Operator::Eq,
            "!=" | "≠" => Operator::Ne,
            "<=" | "≤" => Operator::Le,
            ">=" | "≥" => Operator::Ge,
            "<" => Operator::Lt,
            ">" => Operator::Gt,
            _ => return None,
        })
    }

    fn compare(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Operator::Eq => lhs == rhs,
            Operator::Ne => lhs != rhs,
            Operator::Le => lhs <= rhs,
            Operator::Ge => lhs >= rhs,
            Operator::Lt => lhs < rhs,
            Operator::Gt => lhs > rhs,
        }
    }
}

/// `(feature, operator, value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub op: Operator,
    pub value: Value,
}

impl Predicate {
    pub fn new(feature: usize, op: Operator, value: Value) -> Self {
        Predicate { feature, op, value }
    }

    pub fn eq_level(feature: usize, level: u32) -> Self {
        Predicate::new(feature, Operator::Eq, Value::Level(level))
    }

    /// Evaluates against one stored value; `None` on a kind mismatch.
    fn eval(&self, x: &Value) -> Option<bool> {
        match (x, self.value) {
            (Value::Number(a), Value::Number(b)) => Some(self.op.compare(*a, b)),
            (Value::Level(a), Value::Level(b)) => match self.op {
                Operator::Eq => Some(*a == b),
                Operator::Ne => Some(*a != b),
                _ => None,
            },
            _ => None,
        }
    }
}

/// Non-empty conjunction of predicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Predicate>", into = "Vec<Predicate>")]
pub struct Pattern {
    predicates: Vec<Predicate>,
    features: FeatureMask,
}

impl TryFrom<Vec<Predicate>> for Pattern {
    type Error = Error;

    fn try_from(predicates: Vec<Predicate>) -> Result<Self> {
        Pattern::unchecked(predicates)
    }
}

impl From<Pattern> for Vec<Predicate> {
    fn from(p: Pattern) -> Self {
        p.predicates
    }
}

impl Pattern {
    /// Validates the predicates against `space` and drops exact duplicates.
    pub fn new<T: Scalar>(predicates: Vec<Predicate>, space: &FeatureSpace<T>) -> Result<Self> {
        for p in &predicates {
            if p.feature >= space.len() {
                return Err(Error::InvalidPattern(format!("unknown feature index {}", p.feature)));
            }
            let desc = space.descriptor(p.feature);
            match (desc.kind, p.value) {
                (FeatureKind::Numeric, Value::Number(v)) if !v.is_nan() => {}
                (FeatureKind::Numeric, _) => {
                    return Err(Error::InvalidPattern(format!(
                        "numeric feature '{}' compared with a non-number",
                        desc.name
                    )))
                }
                (_, Value::Level(l)) => {
                    if p.op.is_ordering() {
                        return Err(Error::InvalidPattern(format!(
                            "ordering operator {} on non-numeric feature '{}'",
                            p.op.symbol(),
                            desc.name
                        )));
                    }
                    if l as usize >= desc.levels.len() {
                        return Err(Error::InvalidPattern(format!(
                            "level {l} outside the domain of '{}'",
                            desc.name
                        )));
                    }
                }
                (_, Value::Number(_)) => {
                    return Err(Error::InvalidPattern(format!(
                        "feature '{}' is not numeric",
                        desc.name
                    )))
                }
            }
        }
        Pattern::unchecked(predicates)
    }

    /// Builds a pattern without checking it against a feature space.
    pub fn unchecked(predicates: Vec<Predicate>) -> Result<Self> {
        let mut kept: Vec<Predicate> = Vec::with_capacity(predicates.len());
        for p in predicates {
            if p.feature >= MAX_FEATURES {
                return Err(Error::InvalidPattern(format!("feature index {} too large", p.feature)));
            }
            if !kept.contains(&p) {
                kept.push(p);
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidPattern("a pattern needs at least one predicate".into()));
        }
        let features = kept.iter().map(|p| p.feature).collect();
        Ok(Pattern { predicates: kept, features })
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    /// Distinct features referenced by the predicates.
    pub fn feature_set(&self) -> FeatureMask {
        self.features
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Fast satisfaction test for well-formed inputs; kind mismatches count
    /// as failure. Use [`satisfies`] for the checked variant.
    pub fn matches(&self, x: &[Value]) -> bool {
        self.predicates
            .iter()
            .all(|p| x.get(p.feature).and_then(|v| p.eval(v)).unwrap_or(false))
    }

    pub fn display<'a, T>(&'a self, space: &'a FeatureSpace<T>) -> PatternDisplay<'a, T> {
        PatternDisplay { pattern: self, space }
    }
}

/// True iff every predicate of `c` holds for `x`.
pub fn satisfies(x: &[Value], c: &Pattern) -> Result<bool> {
    let mut all = true;
    for p in c.predicates() {
        let v = x.get(p.feature).ok_or_else(|| {
            Error::InvalidPattern(format!("feature {} missing from the vector", p.feature))
        })?;
        match p.eval(v) {
            Some(holds) => all &= holds,
            None => {
                return Err(Error::InvalidPattern(format!(
                    "predicate on feature {} does not match the stored value kind",
                    p.feature
                )))
            }
        }
    }
    Ok(all)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub condition: Pattern,
    pub treatment: TreatmentId,
}

impl Rule {
    pub fn new(condition: Pattern, treatment: TreatmentId) -> Self {
        Rule { condition, treatment }
    }
}

/// An ordered rule list followed by a default treatment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionList {
    pub rules: Vec<Rule>,
    pub default: TreatmentId,
}

impl DecisionList {
    pub fn new(rules: Vec<Rule>, default: TreatmentId) -> Self {
        DecisionList { rules, default }
    }

    pub fn default_only(default: TreatmentId) -> Self {
        DecisionList { rules: Vec::new(), default }
    }

    /// Number of rules, excluding the default.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Checks treatments and patterns against the spaces and a length cap.
    pub fn validate<T: Scalar>(
        &self,
        features: &FeatureSpace<T>,
        treatments: &TreatmentSpace<T>,
        max_len: Option<usize>,
    ) -> Result<()> {
        if let Some(max) = max_len {
            if self.rules.len() > max {
                return Err(Error::InvalidList(format!(
                    "{} rules exceed the maximum of {max}",
                    self.rules.len()
                )));
            }
        }
        if !treatments.contains(self.default) {
            return Err(Error::InvalidList(format!("unknown default treatment {}", self.default)));
        }
        for (j, r) in self.rules.iter().enumerate() {
            if !treatments.contains(r.treatment) {
                return Err(Error::InvalidList(format!("rule {j}: unknown treatment {}", r.treatment)));
            }
            Pattern::new(r.condition.predicates().to_vec(), features)?;
        }
        Ok(())
    }

    /// Index of the first rule `x` satisfies; `None` means the default group.
    pub fn route(&self, x: &[Value]) -> Option<usize> {
        self.rules.iter().position(|r| r.condition.matches(x))
    }

    pub fn assign(&self, x: &[Value]) -> TreatmentId {
        match self.route(x) {
            Some(j) => self.rules[j].treatment,
            None => self.default,
        }
    }

    /// Cumulative feature sets `N_1 ⊆ N_2 ⊆ … ⊆ N_L`.
    pub fn prefix_feature_sets(&self) -> Vec<FeatureMask> {
        let mut acc = FeatureMask::EMPTY;
        self.rules
            .iter()
            .map(|r| {
                acc = acc.union(r.condition.feature_set());
                acc
            })
            .collect()
    }

    /// Features measured to route `x`: those of `c_1 … c_j` when rule `j`
    /// fires, all of `c_1 … c_L` when the default fires.
    pub fn evaluated_features(&self, x: &[Value]) -> FeatureMask {
        let upto = match self.route(x) {
            Some(j) => j + 1,
            None => self.rules.len(),
        };
        self.rules[..upto]
            .iter()
            .fold(FeatureMask::EMPTY, |m, r| m.union(r.condition.feature_set()))
    }

    pub fn display<'a, T>(
        &'a self,
        features: &'a FeatureSpace<T>,
        treatments: &'a TreatmentSpace<T>,
    ) -> ListDisplay<'a, T> {
        ListDisplay { list: self, features, treatments }
    }
}

pub fn assign(list: &DecisionList, x: &[Value]) -> TreatmentId {
    list.assign(x)
}

/// `d'(π(x))`.
pub fn treatment_cost<T: Scalar>(
    list: &DecisionList,
    x: &[Value],
    treatments: &TreatmentSpace<T>,
) -> T {
    treatments.cost(list.assign(x))
}

/// Cost of the distinct features evaluated while routing `x`.
pub fn assessment_cost<T: Scalar>(
    list: &DecisionList,
    x: &[Value],
    features: &FeatureSpace<T>,
) -> T {
    features.mask_cost(list.evaluated_features(x))
}

/// Subject groups `R_1 … R_L` and `R_default`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
    pub default_group: Vec<usize>,
}

pub fn partition<T: Scalar>(list: &DecisionList, data: &Dataset<T>) -> Partition {
    let mut groups = vec![Vec::new(); list.len()];
    let mut default_group = Vec::new();
    for (i, r) in data.records().iter().enumerate() {
        match list.route(&r.x) {
            Some(j) => groups[j].push(i),
            None => default_group.push(i),
        }
    }
    Partition { groups, default_group }
}

pub struct PatternDisplay<'a, T> {
    pattern: &'a Pattern,
    space: &'a FeatureSpace<T>,
}

impl<T> fmt::Display for PatternDisplay<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.pattern.predicates.iter().enumerate() {
            if k > 0 {
                f.write_str(" and ")?;
            }
            let desc = &self.space.features[p.feature];
            write!(f, "{} {} ", desc.name, p.op.symbol())?;
            match p.value {
                Value::Level(l) => match desc.levels.get(l as usize) {
                    Some(label) => f.write_str(label)?,
                    None => write!(f, "level#{l}")?,
                },
                Value::Number(v) => write!(f, "{v}")?,
            }
        }
        Ok(())
    }
}

pub struct ListDisplay<'a, T> {
    list: &'a DecisionList,
    features: &'a FeatureSpace<T>,
    treatments: &'a TreatmentSpace<T>,
}

impl<T: Scalar> fmt::Display for ListDisplay<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, r) in self.list.rules.iter().enumerate() {
            let kw = if j == 0 { "if" } else { "else if" };
            writeln!(
                f,
                "{kw} {} then {}",
                r.condition.display(self.features),
                self.treatments.name(r.treatment)
            )?;
        }
        if self.list.rules.is_empty() {
            writeln!(f, "always {}", self.treatments.name(self.list.default))
        } else {
            writeln!(f, "else {}", self.treatments.name(self.list.default))
        }
    }
}
