//! Independent reference implementations used as test oracles.

use agint_core::assessment::{Assessment, ConfidenceBasis, Strength};

fn rank(s: Strength) -> u8 {
    match s {
        Strength::Bot => 0,
        Strength::Weak => 1,
        Strength::Strong => 2,
    }
}

fn basis_rank(b: ConfidenceBasis) -> usize {
    match b {
        ConfidenceBasis::Model => 0,
        ConfidenceBasis::Located => 1,
        ConfidenceBasis::Applicable => 2,
        ConfidenceBasis::Corroborated => 3,
        ConfidenceBasis::Checked => 4,
    }
}

/// Order on assessments written out per component, without the library's
/// join.
pub fn leq(a: &Assessment, b: &Assessment) -> bool {
    match (a, b) {
        (Assessment::Four(x), Assessment::Four(y)) => {
            (!x.support || y.support) && (!x.refute || y.refute)
        }
        (Assessment::Graded(x), Assessment::Graded(y)) => {
            rank(x.support) <= rank(y.support) && rank(x.refute) <= rank(y.refute)
        }
        (Assessment::Stratified(x), Assessment::Stratified(y)) => {
            let side = |p: &[Strength; 5], q: &[Strength; 5]| {
                p.iter().zip(q).all(|(a, b)| rank(*a) <= rank(*b))
            };
            side(x.support.levels(), y.support.levels())
                && side(x.refute.levels(), y.refute.levels())
        }
        _ => false,
    }
}

/// Brute-force `b(k) = ⊔ { g_i : k ⊑ k_i }` at every threshold.
pub fn summary(records: &[(Strength, ConfidenceBasis)]) -> [Strength; 5] {
    let mut out = [Strength::Bot; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        for (g, ki) in records {
            if k <= basis_rank(*ki) && rank(*g) > rank(*slot) {
                *slot = *g;
            }
        }
    }
    out
}

const S3: [Strength; 3] = [Strength::Bot, Strength::Weak, Strength::Strong];

/// Every non-increasing map from five thresholds into three strengths.
pub fn antitone_maps() -> Vec<[Strength; 5]> {
    let mut out = Vec::new();
    for code in 0..243usize {
        let mut m = [Strength::Bot; 5];
        let mut c = code;
        for slot in m.iter_mut() {
            *slot = S3[c % 3];
            c /= 3;
        }
        if m.windows(2).all(|w| rank(w[0]) >= rank(w[1])) {
            out.push(m);
        }
    }
    out
}

/// Longest strictly increasing chain (counted in edges) over an explicit
/// element list and order.
pub fn longest_chain<T>(elems: &[T], le: impl Fn(&T, &T) -> bool) -> usize {
    let n = elems.len();
    // Repeated relaxation; strict order is acyclic so n rounds suffice.
    let mut depth = vec![0usize; n];
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i != j
                    && le(&elems[j], &elems[i])
                    && !le(&elems[i], &elems[j])
                    && depth[j] + 1 > depth[i]
                {
                    depth[i] = depth[j] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    depth.into_iter().max().unwrap_or(0)
}

pub fn four_height() -> usize {
    let elems: Vec<(bool, bool)> = [false, true]
        .iter()
        .flat_map(|s| [false, true].map(|r| (*s, r)))
        .collect();
    longest_chain(&elems, |a, b| (!a.0 || b.0) && (!a.1 || b.1))
}

pub fn graded_height() -> usize {
    let elems: Vec<(u8, u8)> = (0..3).flat_map(|s| (0..3).map(move |r| (s, r))).collect();
    longest_chain(&elems, |a, b| a.0 <= b.0 && a.1 <= b.1)
}

/// Height of pairs of antitone maps, by search over all 441 pairs.
pub fn stratified_height() -> usize {
    let maps = antitone_maps();
    let pairs: Vec<([Strength; 5], [Strength; 5])> = maps
        .iter()
        .flat_map(|s| maps.iter().map(move |r| (*s, *r)))
        .collect();
    let le =
        |a: &[Strength; 5], b: &[Strength; 5]| a.iter().zip(b).all(|(x, y)| rank(*x) <= rank(*y));
    // Strict order raises total rank, so rank order is a topological order.
    let total = |p: &([Strength; 5], [Strength; 5])| -> u32 {
        p.0.iter()
            .chain(p.1.iter())
            .map(|s| u32::from(rank(*s)))
            .sum()
    };
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by_key(|&i| total(&pairs[i]));
    let mut depth = vec![0usize; pairs.len()];
    for (pos, &i) in idx.iter().enumerate() {
        for &j in &idx[..pos] {
            let (a, b) = (&pairs[j], &pairs[i]);
            if a != b && le(&a.0, &b.0) && le(&a.1, &b.1) {
                depth[i] = depth[i].max(depth[j] + 1);
            }
        }
    }
    depth.into_iter().max().unwrap_or(0)
}
