//! Primitive substitutions and their unique invariant measure.
//!
//! Frequencies are estimated by counting inside the cyclic words
//! `σ^m(u)`, where `u` is a short cyclic word all of whose cyclic two-letter
//! factors are legal. Every cyclic factor of `σ^m(u)` is then a factor of the
//! substitution language, and cyclic counts define a shift-invariant measure
//! exactly (left and right extensions sum to the count of the word).

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Error, Result};

/// Default cap on the length of the longest counting word.
pub const DEFAULT_MAX_CYCLE: usize = 1 << 24;
/// Two estimates (levels `m` and `m + 2`) closer than this count as stabilized.
pub const STABILIZATION_TOL: f64 = 1e-7;

/// Distribution of the factors of a fixed length, estimated by cyclic counting.
#[derive(Debug, Clone)]
pub struct FactorTable {
    pub len: usize,
    /// `(word, frequency)` sorted by word.
    pub entries: Vec<(Vec<u8>, f64)>,
    /// Largest change of any frequency against the level two steps down.
    pub max_change: f64,
}

#[derive(Debug)]
pub struct Substitution {
    rules: Vec<Vec<u8>>,
    cycle_seed: Vec<u8>,
    max_cycle: usize,
    levels: OnceLock<Vec<Vec<u8>>>,
    tables: Mutex<HashMap<usize, Arc<FactorTable>>>,
    /// Smallest power `p` with every `σ^p(a)` of length at least 2, and those images.
    power: usize,
    power_images: Vec<Vec<u8>>,
    counts: Mutex<HashMap<(usize, usize), Arc<Counts>>>,
}

type Counts = HashMap<Vec<u8>, u64>;

/// Levels up to this length are counted directly.
const DIRECT_COUNT_LEN: usize = 1 << 16;

impl Clone for Substitution {
    fn clone(&self) -> Self {
        Self {
            rules: self.rules.clone(),
            cycle_seed: self.cycle_seed.clone(),
            max_cycle: self.max_cycle,
            levels: self.levels.clone(),
            tables: Mutex::new(self.tables.lock().unwrap().clone()),
            power: self.power,
            power_images: self.power_images.clone(),
            counts: Mutex::new(self.counts.lock().unwrap().clone()),
        }
    }
}

fn apply(rules: &[Vec<u8>], w: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(w.len() * 2);
    for &a in w {
        out.extend_from_slice(&rules[a as usize]);
    }
    out
}

fn is_primitive(rules: &[Vec<u8>]) -> bool {
    let d = rules.len();
    let base: Vec<Vec<bool>> = (0..d)
        .map(|a| (0..d).map(|b| rules[a].contains(&(b as u8))).collect())
        .collect();
    let mut m = base.clone();
    // Wielandt: a primitive d x d matrix has M^((d-1)^2 + 1) > 0.
    let limit = (d - 1) * (d - 1) + 1;
    for _ in 1..limit {
        if m.iter().all(|r| r.iter().all(|x| *x)) {
            return true;
        }
        let mut next = vec![vec![false; d]; d];
        for i in 0..d {
            for k in 0..d {
                if m[i][k] {
                    for j in 0..d {
                        next[i][j] |= base[k][j];
                    }
                }
            }
        }
        m = next;
    }
    m.iter().all(|r| r.iter().all(|x| *x))
}

/// Shortest cycle in the graph of legal two-letter factors, preferring cycles
/// through low letters.
fn shortest_cycle(edges: &HashSet<(u8, u8)>, d: usize) -> Option<Vec<u8>> {
    let mut best: Option<Vec<u8>> = None;
    for start in 0..d as u8 {
        // BFS from start's successors back to start.
        let mut prev: HashMap<u8, u8> = HashMap::new();
        let mut queue = VecDeque::new();
        for b in 0..d as u8 {
            if edges.contains(&(start, b)) {
                if b == start {
                    return Some(vec![start]);
                }
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(b) {
                    e.insert(start);
                    queue.push_back(b);
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            if edges.contains(&(v, start)) {
                let mut cycle = vec![v];
                let mut cur = v;
                while let Some(&p) = prev.get(&cur) {
                    if p == start {
                        break;
                    }
                    cycle.push(p);
                    cur = p;
                }
                cycle.push(start);
                cycle.reverse();
                if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
                    best = Some(cycle);
                }
                break;
            }
            for b in 0..d as u8 {
                if edges.contains(&(v, b)) && !prev.contains_key(&b) && b != start {
                    prev.insert(b, v);
                    queue.push_back(b);
                }
            }
        }
    }
    best
}

impl Substitution {
    pub fn new(rules: Vec<Vec<u8>>, max_cycle: usize) -> Result<Self> {
        let d = rules.len();
        if d < 2 {
            return invalid("substitution needs an alphabet of at least two letters");
        }
        for (a, r) in rules.iter().enumerate() {
            if r.is_empty() {
                return invalid(format!("substitution image of letter {a} is empty"));
            }
            if let Some(b) = r.iter().find(|&&b| b as usize >= d) {
                return invalid(format!("letter {b} in the image of {a} is outside the alphabet"));
            }
        }
        if !is_primitive(&rules) {
            return invalid("substitution matrix is not primitive");
        }
        // A letter generating a fixed point of some power of the substitution.
        let mut a = 0u8;
        let mut visited = vec![false; d];
        while !visited[a as usize] {
            visited[a as usize] = true;
            a = rules[a as usize][0];
        }
        let mut prefix = vec![a];
        while prefix.len() < 1 << 14 {
            let next = apply(&rules, &prefix);
            prefix = next;
        }
        let edges: HashSet<(u8, u8)> = prefix.windows(2).map(|w| (w[0], w[1])).collect();
        let cycle_seed = shortest_cycle(&edges, d)
            .ok_or_else(|| Error::Validation("no cyclic word of legal two-letter factors".into()))?;
        let mut power = 1;
        let mut power_images: Vec<Vec<u8>> = rules.clone();
        while power_images.iter().any(|w| w.len() < 2) {
            power += 1;
            power_images = power_images.iter().map(|w| apply(&rules, w)).collect();
        }
        Ok(Self {
            rules,
            cycle_seed,
            max_cycle: max_cycle.max(1 << 10),
            levels: OnceLock::new(),
            tables: Mutex::new(HashMap::new()),
            power,
            power_images,
            counts: Mutex::new(HashMap::new()),
        })
    }

    pub fn rules(&self) -> &[Vec<u8>] {
        &self.rules
    }

    pub fn alphabet_size(&self) -> usize {
        self.rules.len()
    }

    /// `σ^m(u)` for increasing `m`, up to the cap.
    pub fn levels(&self) -> &[Vec<u8>] {
        self.levels.get_or_init(|| {
            let mut levels = vec![self.cycle_seed.clone()];
            loop {
                let next = apply(&self.rules, levels.last().unwrap());
                if next.len() > self.max_cycle || next.len() == levels.last().unwrap().len() {
                    break;
                }
                levels.push(next);
            }
            levels
        })
    }

    /// The longest cyclic counting word.
    pub fn cycle(&self) -> &[u8] {
        self.levels().last().unwrap()
    }

    /// Frequency of `w` with the stabilization stop rule. Returns the estimate
    /// and whether two levels two steps apart agreed within tolerance.
    pub fn word_frequency(&self, w: &[u8]) -> (f64, bool) {
        let levels = self.levels();
        let min_len = 4096.max(1000 * w.len());
        let mut history: Vec<f64> = Vec::new();
        for (m, level) in levels.iter().enumerate() {
            let c = self.level_counts(m, w.len()).get(w).copied().unwrap_or(0);
            let est = c as f64 / level.len() as f64;
            history.push(est);
            let n = history.len();
            if level.len() >= min_len && n >= 3 && (est - history[n - 3]).abs() < STABILIZATION_TOL {
                return (est, true);
            }
        }
        (*history.last().unwrap(), false)
    }

    /// Factors of length `len` with their frequencies in the top level.
    pub fn factor_table(&self, len: usize) -> Arc<FactorTable> {
        if let Some(t) = self.tables.lock().unwrap().get(&len) {
            return t.clone();
        }
        let levels = self.levels();
        let top = levels.last().unwrap();
        let counts = self.level_counts(levels.len() - 1, len);
        let n = top.len() as f64;
        let mut max_change = 0.0f64;
        if levels.len() >= 3 {
            let lower = &levels[levels.len() - 3];
            let lower_counts = self.level_counts(levels.len() - 3, len);
            let ln = lower.len() as f64;
            for (w, c) in counts.iter() {
                let other = lower_counts.get(w).copied().unwrap_or(0) as f64 / ln;
                max_change = max_change.max((*c as f64 / n - other).abs());
            }
            for (w, c) in lower_counts.iter() {
                if !counts.contains_key(w) {
                    max_change = max_change.max(*c as f64 / ln);
                }
            }
        } else {
            max_change = f64::INFINITY;
        }
        let mut entries: Vec<(Vec<u8>, f64)> =
            counts.iter().map(|(w, &c)| (w.clone(), c as f64 / n)).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let table = Arc::new(FactorTable {
            len,
            entries,
            max_change,
        });
        self.tables.lock().unwrap().insert(len, table.clone());
        table
    }

    /// Cyclic counts of the factors of length `n` in level `m`.
    ///
    /// Large levels are `σ^p` of a smaller one: every position of level `m`
    /// lies in the image of exactly one letter of level `m - p`, and the factor
    /// starting there is read off the image of a short factor of level `m - p`.
    fn level_counts(&self, m: usize, n: usize) -> Arc<Counts> {
        if let Some(c) = self.counts.lock().unwrap().get(&(m, n)) {
            return c.clone();
        }
        let levels = self.levels();
        let p = self.power;
        let min_len = self.power_images.iter().map(Vec::len).min().unwrap();
        let ancestor_len = 1 + (n.saturating_sub(1)).div_ceil(min_len);
        let counts = if levels[m].len() <= DIRECT_COUNT_LEN || m < p || ancestor_len > levels[m - p].len() {
            count_factors(&levels[m], n)
        } else {
            let parent = self.level_counts(m - p, ancestor_len);
            let mut acc: Counts = HashMap::new();
            let mut image = Vec::new();
            for (a, &c) in parent.iter() {
                image.clear();
                for &b in a {
                    image.extend_from_slice(&self.power_images[b as usize]);
                }
                for o in 0..self.power_images[a[0] as usize].len() {
                    *acc.entry(image[o..o + n].to_vec()).or_insert(0) += c;
                }
            }
            acc
        };
        let counts = Arc::new(counts);
        self.counts.lock().unwrap().insert((m, n), counts.clone());
        counts
    }

    pub fn permuted(&self, perm: &[u8]) -> Result<Self> {
        let d = self.rules.len();
        let mut rules = vec![Vec::new(); d];
        for a in 0..d {
            rules[perm[a] as usize] = self.rules[a].iter().map(|&b| perm[b as usize]).collect();
        }
        Self::new(rules, self.max_cycle)
    }

    pub fn max_cycle(&self) -> usize {
        self.max_cycle
    }
}

/// Cyclic factor counts of `text` for words of length `len`.
fn count_factors(text: &[u8], len: usize) -> Counts {
    let n = text.len();
    let max_letter = text.iter().copied().max().unwrap_or(0) as u32;
    let bits = (32 - max_letter.leading_zeros()).max(1) as usize;
    if len == 0 {
        return HashMap::from([(Vec::new(), n as u64)]);
    }
    if len * bits <= 128 && len <= n {
        let mask: u128 = if len * bits == 128 {
            u128::MAX
        } else {
            (1u128 << (len * bits)) - 1
        };
        let mut counts: HashMap<u128, u64> = HashMap::new();
        let mut key: u128 = 0;
        for &x in &text[..len - 1] {
            key = (key << bits) | x as u128;
        }
        for i in 0..n {
            let k = i + len - 1;
            let x = if k < n { text[k] } else { text[k - n] };
            key = ((key << bits) | x as u128) & mask;
            *counts.entry(key).or_insert(0) += 1;
        }
        let letter_mask = (1u128 << bits) - 1;
        counts
            .into_iter()
            .map(|(k, c)| {
                let w: Vec<u8> = (0..len)
                    .rev()
                    .map(|j| ((k >> (j * bits)) & letter_mask) as u8)
                    .collect();
                (w, c)
            })
            .collect()
    } else {
        let mut counts: Counts = HashMap::new();
        for i in 0..n {
            let w: Vec<u8> = (i..i + len).map(|k| text[k % n]).collect();
            *counts.entry(w).or_insert(0) += 1;
        }
        counts
    }
}
