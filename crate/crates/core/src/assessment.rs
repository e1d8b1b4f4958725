//! Assessment lattices.
//!
//! Three finite-height join-semilattices summarize the evidential status of a
//! claim:
//!
//! - [`FourValue`]: one presence bit per polarity.
//! - [`GradedValue`]: an evidence [`Strength`] per polarity (`⊥ < w < s`).
//! - [`StratifiedValue`]: per polarity, an antitone map from
//!   [`ConfidenceBasis`] to [`Strength`], giving the strongest evidence that
//!   survives each confidence threshold.
//!
//! All orders and joins are pointwise. A run fixes one [`DomainKind`]; the
//! tagged [`Assessment`] union rejects cross-domain operations with
//! [`AssessmentError::DomainMismatch`].

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A type whose values form a bounded join-semilattice.
///
/// The induced order is `x ≤ y` iff `x.join(y) == y`.
pub trait JoinSemilattice: Sized + PartialEq {
    fn bottom() -> Self;

    fn join(&self, other: &Self) -> Self;

    fn leq(&self, other: &Self) -> bool {
        self.join(other) == *other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssessmentError {
    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: DomainKind, right: DomainKind },
    #[error("stratified levels are not antitone: {0:?}")]
    NotAntitone([Strength; 5]),
}

/// Evidence strength chain `⊥ < w < s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strength {
    #[serde(rename = "bot")]
    Bot,
    #[serde(rename = "w")]
    Weak,
    #[serde(rename = "s")]
    Strong,
}

impl Strength {
    pub const ALL: [Strength; 3] = [Strength::Bot, Strength::Weak, Strength::Strong];

    pub fn as_wire(self) -> &'static str {
        match self {
            Strength::Bot => "bot",
            Strength::Weak => "w",
            Strength::Strong => "s",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        match s {
            "bot" => Some(Strength::Bot),
            "w" => Some(Strength::Weak),
            "s" => Some(Strength::Strong),
            _ => None,
        }
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strength::Bot => "⊥",
            Strength::Weak => "w",
            Strength::Strong => "s",
        })
    }
}

impl JoinSemilattice for Strength {
    fn bottom() -> Self {
        Strength::Bot
    }

    fn join(&self, other: &Self) -> Self {
        (*self).max(*other)
    }

    fn leq(&self, other: &Self) -> bool {
        self <= other
    }
}

/// Trust stratum of a piece of evidence, totally ordered from `Model`
/// (an unsupported model judgment) up to `Checked` (validated by source
/// inspection, a deterministic tool, or a human).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceBasis {
    Model,
    Located,
    Applicable,
    Corroborated,
    Checked,
}

impl ConfidenceBasis {
    pub const ALL: [ConfidenceBasis; 5] = [
        ConfidenceBasis::Model,
        ConfidenceBasis::Located,
        ConfidenceBasis::Applicable,
        ConfidenceBasis::Corroborated,
        ConfidenceBasis::Checked,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_wire(self) -> &'static str {
        match self {
            ConfidenceBasis::Model => "model",
            ConfidenceBasis::Located => "located",
            ConfidenceBasis::Applicable => "applicable",
            ConfidenceBasis::Corroborated => "corroborated",
            ConfidenceBasis::Checked => "checked",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.as_wire() == s)
    }
}

impl fmt::Display for ConfidenceBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_wire())
    }
}

/// Two-bit evidence-presence value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FourValue {
    pub support: bool,
    pub refute: bool,
}

impl FourValue {
    pub fn new(support: bool, refute: bool) -> Self {
        Self { support, refute }
    }
}

impl JoinSemilattice for FourValue {
    fn bottom() -> Self {
        Self::default()
    }

    fn join(&self, other: &Self) -> Self {
        Self {
            support: self.support || other.support,
            refute: self.refute || other.refute,
        }
    }

    fn leq(&self, other: &Self) -> bool {
        (!self.support || other.support) && (!self.refute || other.refute)
    }
}

/// Support/refutation strength pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GradedValue {
    pub support: Strength,
    pub refute: Strength,
}

impl GradedValue {
    pub fn new(support: Strength, refute: Strength) -> Self {
        Self { support, refute }
    }
}

impl JoinSemilattice for GradedValue {
    fn bottom() -> Self {
        Self::new(Strength::Bot, Strength::Bot)
    }

    fn join(&self, other: &Self) -> Self {
        Self {
            support: self.support.join(&other.support),
            refute: self.refute.join(&other.refute),
        }
    }

    fn leq(&self, other: &Self) -> bool {
        self.support <= other.support && self.refute <= other.refute
    }
}

/// Presence bits lift into the graded domain as `false → ⊥`, `true → s`.
impl From<FourValue> for GradedValue {
    fn from(v: FourValue) -> Self {
        let lift = |b| if b { Strength::Strong } else { Strength::Bot };
        GradedValue::new(lift(v.support), lift(v.refute))
    }
}

/// Basis-indexed summary for one polarity: an antitone map `K → G`, stored
/// densely in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StratifiedPolarity {
    levels: [Strength; 5],
}

impl StratifiedPolarity {
    pub fn new(levels: [Strength; 5]) -> Result<Self, AssessmentError> {
        if levels.windows(2).all(|w| w[1] <= w[0]) {
            Ok(Self { levels })
        } else {
            Err(AssessmentError::NotAntitone(levels))
        }
    }

    pub fn levels(&self) -> &[Strength; 5] {
        &self.levels
    }

    pub fn at(&self, basis: ConfidenceBasis) -> Strength {
        self.levels[basis.index()]
    }

    pub fn is_antitone(&self) -> bool {
        self.levels.windows(2).all(|w| w[1] <= w[0])
    }
}

impl JoinSemilattice for StratifiedPolarity {
    fn bottom() -> Self {
        Self {
            levels: [Strength::Bot; 5],
        }
    }

    // Pointwise max of two antitone maps is antitone.
    fn join(&self, other: &Self) -> Self {
        let mut levels = self.levels;
        for (l, o) in levels.iter_mut().zip(other.levels) {
            *l = (*l).max(o);
        }
        Self { levels }
    }

    fn leq(&self, other: &Self) -> bool {
        self.levels.iter().zip(&other.levels).all(|(a, b)| a <= b)
    }
}

/// Per-polarity basis-indexed summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StratifiedValue {
    pub support: StratifiedPolarity,
    pub refute: StratifiedPolarity,
}

impl StratifiedValue {
    pub fn new(support: StratifiedPolarity, refute: StratifiedPolarity) -> Self {
        Self { support, refute }
    }
}

impl JoinSemilattice for StratifiedValue {
    fn bottom() -> Self {
        Self::new(StratifiedPolarity::bottom(), StratifiedPolarity::bottom())
    }

    fn join(&self, other: &Self) -> Self {
        Self::new(
            self.support.join(&other.support),
            self.refute.join(&other.refute),
        )
    }

    fn leq(&self, other: &Self) -> bool {
        self.support.leq(&other.support) && self.refute.leq(&other.refute)
    }
}

/// `b(k) = ⊔ { g_i : k ≤ k_i }`, with the empty join at `⊥`.
pub fn summarize_polarity(records: &[(Strength, ConfidenceBasis)]) -> StratifiedPolarity {
    // Max strength per exact basis, then a suffix max from the top basis down.
    let mut at_basis = [Strength::Bot; 5];
    for &(strength, basis) in records {
        let slot = &mut at_basis[basis.index()];
        *slot = (*slot).max(strength);
    }
    let mut levels = [Strength::Bot; 5];
    let mut running = Strength::Bot;
    for i in (0..5).rev() {
        running = running.max(at_basis[i]);
        levels[i] = running;
    }
    StratifiedPolarity { levels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Four,
    Graded,
    Stratified,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [DomainKind::Four, DomainKind::Graded, DomainKind::Stratified];
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::Four => "four",
            DomainKind::Graded => "graded",
            DomainKind::Stratified => "stratified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub height: usize,
}

impl DomainDescriptor {
    pub fn of(kind: DomainKind) -> Self {
        Self {
            kind,
            height: domain_height(kind),
        }
    }
}

/// An element of one of the three assessment domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assessment {
    Four(FourValue),
    Graded(GradedValue),
    Stratified(StratifiedValue),
}

impl Assessment {
    pub fn graded(support: Strength, refute: Strength) -> Self {
        Assessment::Graded(GradedValue::new(support, refute))
    }

    pub fn four(support: bool, refute: bool) -> Self {
        Assessment::Four(FourValue::new(support, refute))
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Assessment::Four(_) => DomainKind::Four,
            Assessment::Graded(_) => DomainKind::Graded,
            Assessment::Stratified(_) => DomainKind::Stratified,
        }
    }

    pub fn bottom(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Four => Assessment::Four(FourValue::bottom()),
            DomainKind::Graded => Assessment::Graded(GradedValue::bottom()),
            DomainKind::Stratified => Assessment::Stratified(StratifiedValue::bottom()),
        }
    }

    pub fn is_bottom(&self) -> bool {
        *self == Self::bottom(self.kind())
    }

    pub fn join(&self, other: &Self) -> Result<Self, AssessmentError> {
        Ok(match (self, other) {
            (Assessment::Four(a), Assessment::Four(b)) => Assessment::Four(a.join(b)),
            (Assessment::Graded(a), Assessment::Graded(b)) => Assessment::Graded(a.join(b)),
            (Assessment::Stratified(a), Assessment::Stratified(b)) => {
                Assessment::Stratified(a.join(b))
            }
            _ => return Err(self.mismatch(other)),
        })
    }

    pub fn leq(&self, other: &Self) -> Result<bool, AssessmentError> {
        Ok(match (self, other) {
            (Assessment::Four(a), Assessment::Four(b)) => a.leq(b),
            (Assessment::Graded(a), Assessment::Graded(b)) => a.leq(b),
            (Assessment::Stratified(a), Assessment::Stratified(b)) => a.leq(b),
            _ => return Err(self.mismatch(other)),
        })
    }

    /// Explicit domain upgrade from presence bits to strengths.
    pub fn four_to_graded(&self) -> Option<Self> {
        match self {
            Assessment::Four(v) => Some(Assessment::Graded(GradedValue::from(*v))),
            _ => None,
        }
    }

    fn mismatch(&self, other: &Self) -> AssessmentError {
        AssessmentError::DomainMismatch {
            left: self.kind(),
            right: other.kind(),
        }
    }

    /// Table rendering: like `Display`, but graded bottom prints as `⊥²`.
    pub fn compact(&self) -> String {
        match self {
            Assessment::Graded(g) if *g == GradedValue::bottom() => "⊥²".to_string(),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Assessment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assessment::Four(v) => {
                write!(f, "⟨{},{}⟩", u8::from(v.support), u8::from(v.refute))
            }
            Assessment::Graded(v) => write!(f, "⟨{},{}⟩", v.support, v.refute),
            Assessment::Stratified(v) => {
                let row = |p: &StratifiedPolarity| {
                    p.levels
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join("")
                };
                write!(f, "⟨{}|{}⟩", row(&v.support), row(&v.refute))
            }
        }
    }
}

// Wire forms: FOUR `[bool,bool]`, GRADED `["w","bot"]`, STRATIFIED two
// 5-arrays ordered model..checked.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AssessmentWire {
    Four([bool; 2]),
    Graded([Strength; 2]),
    Stratified([[Strength; 5]; 2]),
}

impl Serialize for Assessment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = match self {
            Assessment::Four(v) => AssessmentWire::Four([v.support, v.refute]),
            Assessment::Graded(v) => AssessmentWire::Graded([v.support, v.refute]),
            Assessment::Stratified(v) => {
                AssessmentWire::Stratified([v.support.levels, v.refute.levels])
            }
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Assessment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match AssessmentWire::deserialize(deserializer)? {
            AssessmentWire::Four([s, r]) => Assessment::four(s, r),
            AssessmentWire::Graded([s, r]) => Assessment::graded(s, r),
            AssessmentWire::Stratified([s, r]) => Assessment::Stratified(StratifiedValue::new(
                StratifiedPolarity::new(s).map_err(D::Error::custom)?,
                StratifiedPolarity::new(r).map_err(D::Error::custom)?,
            )),
        })
    }
}

/// Stratified wire arrays without the antitone check, so loaders can report
/// the violation as a diagnostic instead of a parse failure.
pub fn stratified_levels_unchecked(value: &serde_json::Value) -> Option<[[Strength; 5]; 2]> {
    match serde_json::from_value::<AssessmentWire>(value.clone()).ok()? {
        AssessmentWire::Stratified(levels) => Some(levels),
        _ => None,
    }
}

fn all_polarity_maps() -> Vec<StratifiedPolarity> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(5) {
        let mut levels = [Strength::Bot; 5];
        let mut c = code;
        for l in levels.iter_mut() {
            *l = Strength::ALL[c % 3];
            c /= 3;
        }
        if let Ok(p) = StratifiedPolarity::new(levels) {
            out.push(p);
        }
    }
    out
}

/// Every element of a domain.
pub fn elements(kind: DomainKind) -> Vec<Assessment> {
    match kind {
        DomainKind::Four => [false, true]
            .into_iter()
            .flat_map(|s| {
                [false, true]
                    .into_iter()
                    .map(move |r| Assessment::four(s, r))
            })
            .collect(),
        DomainKind::Graded => Strength::ALL
            .into_iter()
            .flat_map(|s| {
                Strength::ALL
                    .into_iter()
                    .map(move |r| Assessment::graded(s, r))
            })
            .collect(),
        DomainKind::Stratified => {
            let maps = all_polarity_maps();
            maps.iter()
                .flat_map(|s| {
                    maps.iter()
                        .map(move |r| Assessment::Stratified(StratifiedValue::new(*s, *r)))
                })
                .collect()
        }
    }
}

/// Length of the longest strictly increasing chain, by memoized search over
/// the enumerated domain.
fn compute_height(kind: DomainKind) -> usize {
    let elems = elements(kind);
    let index: HashMap<Assessment, usize> =
        elems.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let below: Vec<Vec<usize>> = elems
        .iter()
        .map(|x| {
            elems
                .iter()
                .filter(|y| *y != x && y.leq(x).unwrap_or(false))
                .map(|y| index[y])
                .collect()
        })
        .collect();

    let mut memo: Vec<Option<usize>> = vec![None; elems.len()];
    fn depth(i: usize, below: &[Vec<usize>], memo: &mut [Option<usize>]) -> usize {
        if let Some(d) = memo[i] {
            return d;
        }
        let d = below[i]
            .iter()
            .map(|&j| depth(j, below, memo) + 1)
            .max()
            .unwrap_or(0);
        memo[i] = Some(d);
        d
    }
    (0..elems.len())
        .map(|i| depth(i, &below, &mut memo))
        .max()
        .unwrap_or(0)
}

/// Height `H` of a domain, computed once per process.
pub fn domain_height(kind: DomainKind) -> usize {
    static HEIGHTS: OnceLock<[usize; 3]> = OnceLock::new();
    let heights = HEIGHTS.get_or_init(|| DomainKind::ALL.map(compute_height));
    heights[kind as usize]
}
