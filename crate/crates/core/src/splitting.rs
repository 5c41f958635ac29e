//! Group presentations evaluated in an oracle, the defining-subset
//! transform to relators of length at most 3, HNN and amalgam
//! constructors, and the finiteness classifiers for `Z[1/P] ⋊ Z` and
//! products over several local factors.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::groups::{word_ball, Element, GroupError, GroupOracle};

/// Relator orientation used by every emitted HNN presentation.
pub const CONVENTION: &str = "tkt^-1=phi(k)";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SplittingError {
    #[error("steinberg presentation needs n >= 3, got {0}")]
    BadN(usize),
    #[error("presentation has no evaluation")]
    NoEvaluation,
    #[error("budget exhausted after {0} steps")]
    BudgetExceeded(usize),
    #[error("letter `{0}` already in use")]
    LetterClash(String),
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
    #[error("{0} is not a unit over the given primes")]
    NotAUnit(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("prime {0} listed twice")]
    DuplicatePrime(u64),
    #[error("lambda must be nonzero")]
    ZeroLambda,
    #[error("prime set is empty")]
    EmptyPrimes,
    #[error("vectors have different dimensions")]
    DimensionMismatch,
    #[error("bad presentation file: {0}")]
    Format(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A word as `(letter index, exponent)` syllables.
pub type Word = Vec<(usize, i64)>;

/// Freely reduces a word, merging adjacent syllables on the same letter.
pub fn reduce(word: &[(usize, i64)]) -> Word {
    let mut out: Word = Vec::with_capacity(word.len());
    for &(l, e) in word {
        if e == 0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == l => {
                last.1 += e;
                if last.1 == 0 {
                    out.pop();
                }
            }
            _ => out.push((l, e)),
        }
    }
    out
}

pub fn word_length(word: &[(usize, i64)]) -> usize {
    word.iter().map(|(_, e)| e.unsigned_abs() as usize).sum()
}

pub fn invert(word: &[(usize, i64)]) -> Word {
    word.iter().rev().map(|&(l, e)| (l, -e)).collect()
}

/// Expands syllables into single signed letters.
fn letters_of(word: &[(usize, i64)]) -> Vec<(usize, i64)> {
    word.iter().flat_map(|&(l, e)| std::iter::repeat_n((l, e.signum()), e.unsigned_abs() as usize)).collect()
}

/// Images of the letters in a group oracle.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub oracle: GroupOracle,
    pub spec: String,
    /// Image of each letter as a word over oracle generator labels.
    pub words: Vec<Vec<(String, i64)>>,
    pub images: Vec<Element>,
}

impl Evaluation {
    pub fn new(oracle: GroupOracle, spec: impl Into<String>, words: Vec<Vec<(String, i64)>>) -> Result<Evaluation, SplittingError> {
        let images = words.iter().map(|w| oracle.evaluate(w)).collect::<Result<Vec<_>, _>>()?;
        Ok(Evaluation { oracle, spec: spec.into(), words, images })
    }

    pub fn evaluate(&self, word: &[(usize, i64)]) -> Element {
        let o = &self.oracle;
        word.iter().fold(o.identity(), |acc, &(l, e)| o.multiply(&acc, &o.power(&self.images[l], e)))
    }

    fn word_for(&self, word: &[(usize, i64)]) -> Vec<(String, i64)> {
        let mut out = Vec::new();
        for &(l, e) in &letters_of(word) {
            if e > 0 {
                out.extend(self.words[l].iter().cloned());
            } else {
                out.extend(self.words[l].iter().rev().map(|(s, x)| (s.clone(), -x)));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Presentation {
    letters: Vec<String>,
    relators: Vec<Word>,
    evaluation: Option<Evaluation>,
    convention: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct RelatorCheck {
    pub holds: bool,
    pub failing: Option<String>,
    pub checked: usize,
}

impl Presentation {
    pub fn new(letters: Vec<String>, relators: Vec<Word>) -> Result<Presentation, SplittingError> {
        let mut seen = BTreeSet::new();
        for l in &letters {
            if !seen.insert(l) {
                return Err(SplittingError::LetterClash(l.clone()));
            }
        }
        let mut p = Presentation { letters, relators: Vec::new(), evaluation: None, convention: None };
        for r in relators {
            p.push_relator(r)?;
        }
        Ok(p)
    }

    /// Builds a presentation from labelled relators such as `[("r", 4)]`.
    pub fn from_labels(letters: &[&str], relators: &[&[(&str, i64)]]) -> Result<Presentation, SplittingError> {
        let mut p = Presentation::new(letters.iter().map(|s| s.to_string()).collect(), Vec::new())?;
        for r in relators {
            let w = p.word(r)?;
            p.push_relator(w)?;
        }
        Ok(p)
    }

    fn push_relator(&mut self, r: Word) -> Result<(), SplittingError> {
        if let Some(&(l, _)) = r.iter().find(|(l, _)| *l >= self.letters.len()) {
            return Err(SplittingError::UnknownLetter(format!("#{l}")));
        }
        let r = reduce(&r);
        if !r.is_empty() {
            self.relators.push(r);
        }
        Ok(())
    }

    pub fn with_evaluation(mut self, evaluation: Evaluation) -> Result<Presentation, SplittingError> {
        if evaluation.images.len() != self.letters.len() {
            return Err(SplittingError::Format("evaluation must give one image per letter".into()));
        }
        self.evaluation = Some(evaluation);
        Ok(self)
    }

    /// Evaluates each letter `x` as the oracle generator labelled `x`.
    pub fn evaluate_by_label(self, oracle: GroupOracle, spec: &str) -> Result<Presentation, SplittingError> {
        let words = self.letters.iter().map(|l| vec![(l.clone(), 1)]).collect();
        let ev = Evaluation::new(oracle, spec, words)?;
        self.with_evaluation(ev)
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn evaluation(&self) -> Option<&Evaluation> {
        self.evaluation.as_ref()
    }

    pub fn convention(&self) -> Option<&str> {
        self.convention.as_deref()
    }

    pub fn max_relator_length(&self) -> usize {
        self.relators.iter().map(|r| word_length(r)).max().unwrap_or(0)
    }

    pub fn letter_index(&self, label: &str) -> Result<usize, SplittingError> {
        self.letters.iter().position(|l| l == label).ok_or_else(|| SplittingError::UnknownLetter(label.to_string()))
    }

    pub fn word(&self, labels: &[(&str, i64)]) -> Result<Word, SplittingError> {
        labels.iter().map(|&(l, e)| Ok((self.letter_index(l)?, e))).collect()
    }

    pub fn render(&self, word: &[(usize, i64)]) -> String {
        if word.is_empty() {
            return "1".into();
        }
        word.iter()
            .map(|&(l, e)| if e == 1 { self.letters[l].clone() } else { format!("{}^{}", self.letters[l], e) })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn relators_hold(&self) -> Result<RelatorCheck, SplittingError> {
        let ev = self.evaluation.as_ref().ok_or(SplittingError::NoEvaluation)?;
        for (i, r) in self.relators.iter().enumerate() {
            if !ev.oracle.is_identity(&ev.evaluate(r)) {
                return Ok(RelatorCheck { holds: false, failing: Some(self.render(r)), checked: i + 1 });
            }
        }
        Ok(RelatorCheck { holds: true, failing: None, checked: self.relators.len() })
    }

    pub fn to_file(&self) -> PresentationFile {
        PresentationFile {
            letters: self.letters.clone(),
            relators: self.relators.iter().map(|r| r.iter().map(|&(l, e)| (self.letters[l].clone(), e)).collect()).collect(),
            max_relator_length: Some(self.max_relator_length()),
            evaluation: self.evaluation.as_ref().map(|ev| EvaluationFile {
                oracle: ev.spec.clone(),
                images: self.letters.iter().cloned().zip(ev.words.iter().cloned()).collect(),
            }),
            convention: self.convention.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("presentation serializes")
    }

    pub fn from_json(text: &str) -> Result<Presentation, SplittingError> {
        let file: PresentationFile = serde_json::from_str(text).map_err(|e| SplittingError::Format(e.to_string()))?;
        file.into_presentation()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub oracle: String,
    pub images: BTreeMap<String, Vec<(String, i64)>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresentationFile {
    pub letters: Vec<String>,
    pub relators: Vec<Vec<(String, i64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_relator_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

impl PresentationFile {
    pub fn into_presentation(self) -> Result<Presentation, SplittingError> {
        let mut p = Presentation::new(self.letters, Vec::new())?;
        for r in &self.relators {
            let w = r.iter().map(|(l, e)| Ok((p.letter_index(l)?, *e))).collect::<Result<Word, SplittingError>>()?;
            p.push_relator(w)?;
        }
        p.convention = self.convention;
        if let Some(ev) = self.evaluation {
            let oracle = GroupOracle::from_spec(&ev.oracle)?;
            let words = p
                .letters
                .iter()
                .map(|l| ev.images.get(l).cloned().ok_or_else(|| SplittingError::Format(format!("no image for `{l}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let ev = Evaluation::new(oracle, ev.oracle, words)?;
            p = p.with_evaluation(ev)?;
        }
        Ok(p)
    }
}

/// Steinberg relators for `SL_n(Z)` over the elementary matrices `e_ij`:
/// commuting pairs, `[e_ij, e_jk] = e_ik`, and `(e12 e21^-1 e12)^4 = 1`.
pub fn steinberg_presentation(n: usize) -> Result<Presentation, SplittingError> {
    if !(3..=9).contains(&n) {
        return Err(SplittingError::BadN(n));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let letters: Vec<String> = pairs.iter().map(|(i, j)| format!("e{}{}", i + 1, j + 1)).collect();
    let idx = |i: usize, j: usize| pairs.iter().position(|&p| p == (i, j)).unwrap();
    let mut relators = Vec::new();
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate().skip(a + 1) {
            if j != k && i != l {
                relators.push(vec![(a, 1), (b, 1), (a, -1), (b, -1)]);
            }
        }
    }
    for &(i, j) in &pairs {
        for k in (0..n).filter(|&k| k != i && k != j) {
            let (a, b, c) = (idx(i, j), idx(j, k), idx(i, k));
            relators.push(vec![(a, 1), (b, 1), (a, -1), (b, -1), (c, -1)]);
        }
    }
    let (e12, e21) = (idx(0, 1), idx(1, 0));
    let w = [(e12, 1), (e21, -1), (e12, 1)];
    relators.push(w.iter().cycle().take(12).copied().collect());
    let p = Presentation::new(letters, relators)?;
    p.evaluate_by_label(GroupOracle::special_linear(n), &format!("sl:{n}"))
}

/// `m = floor((n + 2) / 3)`.
pub fn defining_exponent(n: usize) -> usize {
    n.div_ceil(3).max(1)
}

/// Rewrites an evaluated presentation over the alphabet `Ŝ^m`, where `Ŝ`
/// is the letter images with their inverses and the identity. Relators are
/// `[x][s][xs]^-1` for `x` in `Ŝ^(m-1)`, `s` in `Ŝ`, the inverse pairs
/// `[s][s^-1][1]^-1`, and every original relator cut into three pieces of
/// length at most `m`.
pub fn defining_subset_presentation(p: &Presentation, budget: usize) -> Result<Presentation, SplittingError> {
    let ev = p.evaluation.as_ref().ok_or(SplittingError::NoEvaluation)?;
    let m = defining_exponent(p.max_relator_length());
    let letter_oracle = letter_oracle(p, ev)?;
    let ball = word_ball(&letter_oracle, m as u32, budget).map_err(|e| match e {
        GroupError::BudgetExceeded(n) => SplittingError::BudgetExceeded(n),
        e => e.into(),
    })?;
    let oracle = &ev.oracle;
    let key_index = |g: &Element| ball.index_of(&oracle.key(g)).expect("product stays in the ball");
    let letters: Vec<String> = (0..ball.len()).map(|i| format!("x{i}")).collect();
    let words: Vec<Vec<(String, i64)>> = (0..ball.len())
        .map(|i| {
            let w: Word = ball.geodesic(i).iter().map(|g| decode_label(g)).collect();
            ev.word_for(&w)
        })
        .collect();

    let identity = key_index(&oracle.identity());
    let hat: Vec<usize> = std::iter::once(identity)
        .chain(letter_oracle.generators().iter().map(|g| key_index(&g.element)))
        .collect();
    let mut relators: BTreeSet<Word> = BTreeSet::new();
    let add = |x: usize, y: usize, z: usize, set: &mut BTreeSet<Word>| {
        let r = reduce(&[(x, 1), (y, 1), (z, -1)]);
        if !r.is_empty() {
            set.insert(r);
        }
    };
    let elements = ball.elements();
    for x in (0..ball.len()).filter(|&i| (ball.length_of_index(i) as usize) < m) {
        for &s in &hat {
            let z = key_index(&oracle.multiply(&elements[x], &elements[s]));
            add(x, s, z, &mut relators);
        }
    }
    for &s in &hat {
        let inv = key_index(&oracle.inverse(&elements[s]));
        add(s, inv, identity, &mut relators);
    }
    for r in &p.relators {
        let flat = letters_of(r);
        let piece = |k: usize| -> Word { flat.iter().skip(k * m).take(m).copied().collect() };
        let (u, v) = (ev.evaluate(&piece(0)), ev.evaluate(&piece(1)));
        let z = key_index(&oracle.multiply(&u, &v));
        add(key_index(&u), key_index(&v), z, &mut relators);
    }
    let mut out = Presentation::new(letters, relators.into_iter().collect())?;
    out.evaluation = Some(Evaluation { oracle: oracle.clone(), spec: ev.spec.clone(), words, images: elements.to_vec() });
    Ok(out)
}

/// The oracle generated by the letter images and their inverses, labelled
/// `+i` and `-i`.
fn letter_oracle(p: &Presentation, ev: &Evaluation) -> Result<GroupOracle, SplittingError> {
    let mut gens = Vec::new();
    for (i, g) in ev.images.iter().enumerate().take(p.letters.len()) {
        gens.push((format!("+{i}"), g.clone()));
        gens.push((format!("-{i}"), ev.oracle.inverse(g)));
    }
    Ok(ev.oracle.clone().with_generators(gens)?)
}

fn decode_label(label: &str) -> (usize, i64) {
    let sign = if label.starts_with('-') { -1 } else { 1 };
    (label[1..].parse().expect("letter oracle label"), sign)
}

/// `<H, t | t k t^-1 = phi(k)>`, relators `t k t^-1 phi(k)^-1`.
pub fn hnn_presentation(base: &Presentation, stable: &str, pairs: &[(Word, Word)]) -> Result<Presentation, SplittingError> {
    if base.letters.iter().any(|l| l == stable) {
        return Err(SplittingError::LetterClash(stable.to_string()));
    }
    let mut letters = base.letters.clone();
    letters.push(stable.to_string());
    let t = letters.len() - 1;
    let mut relators = base.relators.clone();
    for (k, phi_k) in pairs {
        let mut r = vec![(t, 1)];
        r.extend(k.iter().copied());
        r.push((t, -1));
        r.extend(invert(phi_k));
        relators.push(r);
    }
    let mut p = Presentation::new(letters, relators)?;
    p.convention = Some(CONVENTION.to_string());
    Ok(p)
}

/// `<A, B | c = phi(c)>`, relators `c phi(c)^-1` with `c` over `A` and `phi(c)` over `B`.
pub fn amalgam_presentation(a: &Presentation, b: &Presentation, pairs: &[(Word, Word)]) -> Result<Presentation, SplittingError> {
    if let Some(l) = b.letters.iter().find(|l| a.letters.contains(l)) {
        return Err(SplittingError::LetterClash(l.clone()));
    }
    let shift = a.letters.len();
    let lift = |w: &Word| -> Word { w.iter().map(|&(l, e)| (l + shift, e)).collect() };
    let mut letters = a.letters.clone();
    letters.extend(b.letters.iter().cloned());
    let mut relators = a.relators.clone();
    relators.extend(b.relators.iter().map(&lift));
    for (c, phi_c) in pairs {
        let mut r = c.clone();
        r.extend(invert(&lift(phi_c)));
        relators.push(r);
    }
    Presentation::new(letters, relators)
}

/// Order of the presented group by Todd–Coxeter enumeration over the
/// trivial subgroup, with at most `limit` cosets defined.
pub fn enumerate_order(p: &Presentation, limit: usize) -> Result<usize, SplittingError> {
    let cols = 2 * p.letters.len();
    let rels: Vec<Vec<usize>> = p
        .relators
        .iter()
        .map(|r| letters_of(r).into_iter().map(|(l, e)| if e > 0 { 2 * l } else { 2 * l + 1 }).collect())
        .collect();
    let mut e = Enumerator { table: vec![vec![None; cols]], rep: vec![0], queue: Vec::new(), defined: 1, limit };
    let mut c = 0;
    while c < e.table.len() {
        if e.live(c) {
            for r in &rels {
                if !e.live(c) {
                    break;
                }
                e.scan_and_fill(c, r)?;
            }
            for x in 0..cols {
                if e.live(c) && e.table[c][x].is_none() {
                    e.define(c, x)?;
                }
            }
        }
        c += 1;
    }
    Ok((0..e.table.len()).filter(|&c| e.live(c)).count())
}

struct Enumerator {
    table: Vec<Vec<Option<usize>>>,
    rep: Vec<usize>,
    queue: Vec<usize>,
    defined: usize,
    limit: usize,
}

fn inv(x: usize) -> usize {
    x ^ 1
}

impl Enumerator {
    fn live(&self, c: usize) -> bool {
        self.rep[c] == c
    }

    fn define(&mut self, c: usize, x: usize) -> Result<usize, SplittingError> {
        if self.defined >= self.limit {
            return Err(SplittingError::BudgetExceeded(self.defined));
        }
        self.defined += 1;
        let d = self.table.len();
        self.table.push(vec![None; self.table[0].len()]);
        self.rep.push(d);
        self.table[c][x] = Some(d);
        self.table[d][inv(x)] = Some(c);
        Ok(d)
    }

    fn find(&mut self, mut c: usize) -> usize {
        let mut root = c;
        while self.rep[root] != root {
            root = self.rep[root];
        }
        while self.rep[c] != root {
            let next = self.rep[c];
            self.rep[c] = root;
            c = next;
        }
        root
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            self.rep[hi] = lo;
            self.queue.push(hi);
        }
    }

    fn coincidence(&mut self, a: usize, b: usize) {
        self.merge(a, b);
        let mut head = 0;
        while head < self.queue.len() {
            let e = self.queue[head];
            head += 1;
            for x in 0..self.table[e].len() {
                if let Some(f) = self.table[e][x] {
                    if self.table[f][inv(x)] == Some(e) {
                        self.table[f][inv(x)] = None;
                    }
                    let (e1, f1) = (self.find(e), self.find(f));
                    if let Some(t) = self.table[e1][x] {
                        self.merge(f1, t);
                    } else if let Some(t) = self.table[f1][inv(x)] {
                        self.merge(e1, t);
                    } else {
                        self.table[e1][x] = Some(f1);
                        self.table[f1][inv(x)] = Some(e1);
                    }
                }
            }
        }
        self.queue.clear();
    }

    fn scan_and_fill(&mut self, c: usize, word: &[usize]) -> Result<(), SplittingError> {
        if word.is_empty() {
            return Ok(());
        }
        loop {
            let (mut f, mut i) = (c, 0usize);
            let (mut b, mut j) = (c, word.len() as isize - 1);
            while (i as isize) <= j {
                match self.table[f][word[i]] {
                    Some(n) => {
                        f = n;
                        i += 1;
                    }
                    None => break,
                }
            }
            if (i as isize) > j {
                if f != c {
                    self.coincidence(f, c);
                }
                return Ok(());
            }
            while j >= i as isize {
                match self.table[b][inv(word[j as usize])] {
                    Some(n) => {
                        b = n;
                        j -= 1;
                    }
                    None => break,
                }
            }
            if j < i as isize {
                self.coincidence(f, b);
                return Ok(());
            }
            if j == i as isize {
                self.table[f][word[i]] = Some(b);
                self.table[b][inv(word[i])] = Some(f);
                return Ok(());
            }
            self.define(f, word[i])?;
        }
    }
}

/// Order of the subgroup generated by the letter images, by closing balls.
pub fn evaluated_order(p: &Presentation, budget: usize) -> Result<usize, SplittingError> {
    let ev = p.evaluation.as_ref().ok_or(SplittingError::NoEvaluation)?;
    let oracle = letter_oracle(p, ev)?;
    let mut r = 1;
    loop {
        let ball = word_ball(&oracle, r, budget)?;
        if ball.sphere_counts().last() == Some(&0) {
            return Ok(ball.len());
        }
        r += 1;
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct OrderCheck {
    pub presented_order: usize,
    pub evaluated_order: usize,
    pub passes: bool,
}

/// Compares the enumerated order of a finite presentation with the order
/// of its evaluation.
pub fn order_check(p: &Presentation, budget: usize) -> Result<OrderCheck, SplittingError> {
    let presented_order = enumerate_order(p, budget)?;
    let evaluated_order = evaluated_order(p, budget)?;
    Ok(OrderCheck { presented_order, evaluated_order, passes: presented_order == evaluated_order })
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// `lambda` with its valuations at a finite set of primes.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ValuationVector {
    #[serde(with = "crate::numeric::ratio_serde")]
    pub lambda: Rational64,
    pub primes: Vec<u64>,
    pub valuations: Vec<i64>,
    /// `lambda` has a prime factor outside `primes`.
    pub residual: bool,
}

impl ValuationVector {
    pub fn new(lambda: Rational64, primes: &[u64]) -> Result<ValuationVector, SplittingError> {
        if lambda.is_zero() {
            return Err(SplittingError::ZeroLambda);
        }
        let mut seen = BTreeSet::new();
        for &p in primes {
            if !is_prime(p) {
                return Err(SplittingError::NotPrime(p));
            }
            if !seen.insert(p) {
                return Err(SplittingError::DuplicatePrime(p));
            }
        }
        let (mut num, mut den) = (lambda.numer().unsigned_abs(), lambda.denom().unsigned_abs());
        let mut valuations = Vec::with_capacity(primes.len());
        for &p in primes {
            let mut v = 0i64;
            while num % p == 0 {
                num /= p;
                v += 1;
            }
            while den % p == 0 {
                den /= p;
                v -= 1;
            }
            valuations.push(v);
        }
        Ok(ValuationVector { lambda, primes: primes.to_vec(), valuations, residual: num != 1 || den != 1 })
    }

    pub fn inverse(&self) -> ValuationVector {
        ValuationVector {
            lambda: self.lambda.recip(),
            primes: self.primes.clone(),
            valuations: self.valuations.iter().map(|v| -v).collect(),
            residual: self.residual,
        }
    }

    /// `|lambda|_p = p^(-v_p)` for each listed prime.
    pub fn absolute_values(&self) -> Vec<Rational64> {
        self.primes
            .iter()
            .zip(&self.valuations)
            .map(|(&p, &v)| {
                let pow = Rational64::from_integer(p as i64).pow(v.unsigned_abs() as i32);
                if v >= 0 { pow.recip() } else { pow }
            })
            .collect()
    }

    fn require_unit(&self) -> Result<(), SplittingError> {
        if self.residual {
            return Err(SplittingError::NotAUnit(self.lambda.to_string()));
        }
        Ok(())
    }
}

/// Multiplication by `lambda` engulfs `Z[1/P]` into `Z`.
pub fn engulfs(v: &ValuationVector) -> Result<bool, SplittingError> {
    v.require_unit()?;
    Ok(v.lambda.is_integer() && v.valuations.iter().all(|&x| x >= 1))
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GammaClass {
    NotFinitelyGenerated,
    FgNotFp,
    FinitelyPresented,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SemidirectClass {
    NotCompactlyGenerated,
    CgNotCp,
    CompactlyPresented,
}

impl From<GammaClass> for SemidirectClass {
    fn from(g: GammaClass) -> Self {
        match g {
            GammaClass::NotFinitelyGenerated => SemidirectClass::NotCompactlyGenerated,
            GammaClass::FgNotFp => SemidirectClass::CgNotCp,
            GammaClass::FinitelyPresented => SemidirectClass::CompactlyPresented,
        }
    }
}

/// Classifies `Z[1/P] ⋊_lambda Z`.
pub fn classify_gamma_lambda(v: &ValuationVector) -> Result<GammaClass, SplittingError> {
    v.require_unit()?;
    if v.primes.is_empty() {
        return Err(SplittingError::EmptyPrimes);
    }
    Ok(if v.valuations.contains(&0) {
        GammaClass::NotFinitelyGenerated
    } else if v.valuations.iter().all(|&x| x > 0) || v.valuations.iter().all(|&x| x < 0) {
        GammaClass::FinitelyPresented
    } else {
        GammaClass::FgNotFp
    })
}

/// One factor: a rational direction in `Hom(Z^d, R)` and its residue base.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HomEntry {
    #[serde(with = "ratio_vec")]
    pub direction: Vec<Rational64>,
    pub scale: u64,
}

mod ratio_vec {
    use super::*;
    use crate::numeric::Real;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&r| Real::Exact(r)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational64>, D::Error> {
        Vec::<Real>::deserialize(d)?
            .into_iter()
            .map(|r| r.exact().ok_or_else(|| serde::de::Error::custom("expected exact rationals")))
            .collect()
    }
}

impl HomEntry {
    pub fn new(direction: Vec<Rational64>, scale: u64) -> HomEntry {
        HomEntry { direction, scale }
    }

    pub fn is_zero(&self) -> bool {
        self.direction.iter().all(Zero::is_zero)
    }
}

/// Hom data of `Z[1/P] ⋊_lambda Z` with `A = Z`: `w_p = -v_p(lambda) log p`.
pub fn hom_vector(v: &ValuationVector) -> Vec<HomEntry> {
    v.primes
        .iter()
        .zip(&v.valuations)
        .map(|(&p, &x)| HomEntry::new(vec![Rational64::from_integer(-x)], p))
        .collect()
}

/// Whether `0` lies on the segment `[w1, w2]`.
pub fn zero_in_segment(w1: &HomEntry, w2: &HomEntry) -> Result<bool, SplittingError> {
    if w1.direction.len() != w2.direction.len() {
        return Err(SplittingError::DimensionMismatch);
    }
    if w1.is_zero() || w2.is_zero() {
        return Ok(true);
    }
    let k = w1.direction.iter().position(|x| !x.is_zero()).unwrap();
    let t = -w2.direction[k] / w1.direction[k];
    Ok(t.is_positive() && w1.direction.iter().zip(&w2.direction).all(|(&a, &b)| b == -t * a))
}

pub fn classify_semidirect(h: &[HomEntry]) -> Result<SemidirectClass, SplittingError> {
    if h.iter().any(HomEntry::is_zero) {
        return Ok(SemidirectClass::NotCompactlyGenerated);
    }
    for (i, a) in h.iter().enumerate() {
        for b in &h[i + 1..] {
            if zero_in_segment(a, b)? {
                return Ok(SemidirectClass::CgNotCp);
            }
        }
    }
    Ok(SemidirectClass::CompactlyPresented)
}
