//! Lattice states for the two-type exclusion process.
//!
//! A configuration lives on the integer line with a fixed far-field shape:
//! first-class particles out to the left, holes out to the right. Only a
//! finite window around the disordered region is stored; everything outside
//! the window is implied by the fill. The window always keeps one first-class
//! guard cell on its left edge and one hole guard cell on its right edge, so
//! any bond the event engine can legally touch is materialized.

use std::fmt;

use thiserror::Error;

/// Content of a single lattice site.
///
/// The discriminant order encodes jump priority: a state may displace any
/// state with a smaller discriminant, so `a > b` means "a has priority
/// over b".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SiteState {
    /// Empty site.
    Hole = 0,
    /// Second-class particle: particle toward holes, hole toward particles.
    SecondClass = 1,
    /// Ordinary (first-class) particle.
    FirstClass = 2,
}

impl SiteState {
    /// ASCII glyph used by the pattern grammar and trace dumps.
    pub fn glyph(self) -> char {
        match self {
            SiteState::Hole => 'o',
            SiteState::SecondClass => '*',
            SiteState::FirstClass => '.',
        }
    }

    fn from_glyph(c: char) -> Option<SiteState> {
        match c {
            'o' => Some(SiteState::Hole),
            '*' => Some(SiteState::SecondClass),
            '.' => Some(SiteState::FirstClass),
            _ => None,
        }
    }
}

/// True iff a jump attempt from a site in state `a` onto a site in state `b`
/// succeeds: first-class displaces everything else, second-class displaces
/// holes, and equal states never exchange.
#[inline(always)]
pub fn priority(a: SiteState, b: SiteState) -> bool {
    a > b
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("site {site} outside window [{left}, {right}]")]
    SiteOutOfWindow { site: i64, left: i64, right: i64 },
    #[error("sites {x} and {y} are not nearest neighbours")]
    NotAdjacent { x: i64, y: i64 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("pattern must have the form `P* <body> H*`")]
    BadStructure,
    #[error("pattern body is empty")]
    EmptyBody,
    #[error("illegal character {0:?} in pattern body")]
    IllegalChar(char),
    #[error("more than one origin mark in pattern body")]
    MultipleOrigins,
    #[error("origin mark must be followed by a site character")]
    DanglingOriginMark,
}

/// Two-type configuration on the integer line, stored as a finite window.
///
/// Sites left of the window are first-class, sites right of it are holes.
/// `cells[0]` is always a first-class guard and `cells[last]` a hole guard.
#[derive(Debug, Clone)]
pub struct Configuration {
    window_left: i64,
    cells: Vec<SiteState>,
}

impl Configuration {
    /// Builds a configuration from explicit window contents, adding guard
    /// cells when the given slice does not already carry them.
    pub fn from_cells(window_left: i64, cells: &[SiteState]) -> Configuration {
        let mut v = Vec::with_capacity(cells.len() + 2);
        let mut left = window_left;
        if cells.first() != Some(&SiteState::FirstClass) {
            v.push(SiteState::FirstClass);
            left -= 1;
        }
        v.extend_from_slice(cells);
        if cells.last() != Some(&SiteState::Hole) {
            v.push(SiteState::Hole);
        }
        // A window shorter than 3 cells cannot hold both guards plus content.
        while v.len() < 3 {
            v.push(SiteState::Hole);
        }
        Configuration {
            window_left: left,
            cells: v,
        }
    }

    pub fn window_left(&self) -> i64 {
        self.window_left
    }

    pub fn window_right(&self) -> i64 {
        self.window_left + self.cells.len() as i64 - 1
    }

    pub fn in_window(&self, site: i64) -> bool {
        site >= self.window_left && site <= self.window_right()
    }

    /// State of `site`, using the far-field fill outside the window.
    #[inline(always)]
    pub fn get(&self, site: i64) -> SiteState {
        if site < self.window_left {
            SiteState::FirstClass
        } else {
            match self.cells.get((site - self.window_left) as usize) {
                Some(&s) => s,
                None => SiteState::Hole,
            }
        }
    }

    #[inline(always)]
    fn set(&mut self, site: i64, state: SiteState) {
        let idx = (site - self.window_left) as usize;
        self.cells[idx] = state;
    }

    /// Swaps the contents of two adjacent in-window sites.
    pub fn exchange(&mut self, x: i64, y: i64) -> Result<(), LatticeError> {
        if (x - y).abs() != 1 {
            return Err(LatticeError::NotAdjacent { x, y });
        }
        for site in [x, y] {
            if !self.in_window(site) {
                return Err(LatticeError::SiteOutOfWindow {
                    site,
                    left: self.window_left,
                    right: self.window_right(),
                });
            }
        }
        let a = self.get(x);
        let b = self.get(y);
        self.set(x, b);
        self.set(y, a);
        Ok(())
    }

    /// Replaces the content of one in-window site.
    pub fn replace_site(&mut self, site: i64, state: SiteState) -> Result<(), LatticeError> {
        if !self.in_window(site) {
            return Err(LatticeError::SiteOutOfWindow {
                site,
                left: self.window_left,
                right: self.window_right(),
            });
        }
        self.set(site, state);
        Ok(())
    }

    /// Unchecked swap used by the event engine; callers guarantee the bond
    /// is inside the window.
    #[inline(always)]
    pub(crate) fn swap_unchecked(&mut self, x: i64, y: i64) {
        debug_assert!(self.in_window(x) && self.in_window(y) && (x - y).abs() == 1);
        let i = (x - self.window_left) as usize;
        let j = (y - self.window_left) as usize;
        self.cells.swap(i, j);
    }

    /// Active bounds `(l, r)`: `l` is one left of the leftmost site that is
    /// not first-class, `r` one right of the rightmost site that is not a
    /// hole. Every bond outside `[l, r]` joins equal states and is inert.
    pub fn active_bounds(&self) -> (i64, i64) {
        let first = self
            .cells
            .iter()
            .position(|&s| s != SiteState::FirstClass)
            .expect("hole guard always present");
        let last = self
            .cells
            .iter()
            .rposition(|&s| s != SiteState::Hole)
            .expect("first-class guard always present");
        (
            self.window_left + first as i64 - 1,
            self.window_left + last as i64 + 1,
        )
    }

    /// Grows the window so that `[left, right]` is materialized, extending
    /// by at least half the current length per side touched.
    pub fn ensure_window(&mut self, left: i64, right: i64) {
        let chunk = (self.cells.len() / 2).max(16) as i64;
        if left < self.window_left {
            let need = (self.window_left - left).max(chunk) as usize;
            let mut v = Vec::with_capacity(self.cells.len() + need);
            v.resize(need, SiteState::FirstClass);
            v.extend_from_slice(&self.cells);
            self.cells = v;
            self.window_left -= need as i64;
        }
        if right > self.window_right() {
            let need = (right - self.window_right()).max(chunk) as usize;
            let new_len = self.cells.len() + need;
            self.cells.resize(new_len, SiteState::Hole);
        }
    }

    /// Sites currently holding a second-class particle, in increasing order.
    pub fn second_class_positions(&self) -> Vec<i64> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == SiteState::SecondClass)
            .map(|(i, _)| self.window_left + i as i64)
            .collect()
    }

    /// Number of second-class particles in the window.
    pub fn second_class_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&s| s == SiteState::SecondClass)
            .count()
    }

    /// Replaces every second-class site with `with`, yielding a one-type
    /// marginal of the basic coupling.
    pub fn project_second_class(&self, with: SiteState) -> Configuration {
        let cells: Vec<SiteState> = self
            .cells
            .iter()
            .map(|&s| if s == SiteState::SecondClass { with } else { s })
            .collect();
        Configuration::from_cells(self.window_left, &cells)
    }

    /// Checks the window representation invariants; used by debug scans.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.cells.len() < 3 {
            return Err(format!("window length {} < 3", self.cells.len()));
        }
        if self.cells[0] != SiteState::FirstClass {
            return Err("left guard is not first-class".into());
        }
        if *self.cells.last().unwrap() != SiteState::Hole {
            return Err("right guard is not a hole".into());
        }
        Ok(())
    }

    /// Canonical pattern string for this state. The body spans from the
    /// leftmost non-first-class site to the rightmost non-hole site, widened
    /// if necessary so the origin stays expressible; the origin mark is
    /// omitted when the origin is the first body character.
    pub fn to_pattern(&self) -> String {
        let (l, r) = self.active_bounds();
        // interior of the active region, possibly empty
        let mut lo = l + 1;
        let mut hi = r - 1;
        lo = lo.min(0);
        hi = hi.max(0);
        let mut body = String::new();
        for site in lo..=hi {
            if site == 0 && site != lo {
                body.push('_');
            }
            body.push(self.get(site).glyph());
        }
        format!("P* {body} H*")
    }
}

/// State-level equality: two configurations are equal when every site of the
/// line holds the same state, regardless of how wide their windows are.
impl PartialEq for Configuration {
    fn eq(&self, other: &Configuration) -> bool {
        let lo = self.window_left.min(other.window_left);
        let hi = self.window_right().max(other.window_right());
        (lo..=hi).all(|s| self.get(s) == other.get(s))
    }
}

impl Eq for Configuration {}

/// Canonical textual dump: window bounds plus the cell string, as written
/// into trace files.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}] ", self.window_left, self.window_right())?;
        for &s in &self.cells {
            write!(f, "{}", s.glyph())?;
        }
        Ok(())
    }
}

/// Parses the pattern grammar `P* <body> H*`.
///
/// Body characters: `.` first-class, `*` second-class, `o` hole. A `_`
/// prefix marks the origin site; by default the first body character sits at
/// the origin. Guard cells are added on each side of the body.
pub fn parse_pattern(text: &str) -> Result<Configuration, PatternError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let [head, body, tail] = tokens.as_slice() else {
        return Err(PatternError::BadStructure);
    };
    if *head != "P*" || *tail != "H*" {
        return Err(PatternError::BadStructure);
    }
    let mut states = Vec::new();
    let mut origin_index: Option<usize> = None;
    let mut pending_mark = false;
    for c in body.chars() {
        if c == '_' {
            if pending_mark {
                return Err(PatternError::DanglingOriginMark);
            }
            if origin_index.is_some() {
                return Err(PatternError::MultipleOrigins);
            }
            pending_mark = true;
            continue;
        }
        let state = SiteState::from_glyph(c).ok_or(PatternError::IllegalChar(c))?;
        if pending_mark {
            origin_index = Some(states.len());
            pending_mark = false;
        }
        states.push(state);
    }
    if pending_mark {
        return Err(PatternError::DanglingOriginMark);
    }
    if states.is_empty() {
        return Err(PatternError::EmptyBody);
    }
    let k = origin_index.unwrap_or(0) as i64;
    Ok(Configuration::from_cells(-k, &states))
}

/// Multi-type state: every site carries an integer class label and lower
/// labels have priority. Labels outside the stored window are frozen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiTypeConfiguration {
    window_left: i64,
    labels: Vec<i64>,
}

impl MultiTypeConfiguration {
    /// Initial state `label(i) = i` on the window `[-radius, radius]`.
    pub fn identity(radius: i64) -> MultiTypeConfiguration {
        assert!(radius >= 1, "radius must be positive");
        MultiTypeConfiguration {
            window_left: -radius,
            labels: (-radius..=radius).collect(),
        }
    }

    pub fn window_left(&self) -> i64 {
        self.window_left
    }

    pub fn window_right(&self) -> i64 {
        self.window_left + self.labels.len() as i64 - 1
    }

    #[inline(always)]
    pub fn label_at(&self, site: i64) -> i64 {
        self.labels[(site - self.window_left) as usize]
    }

    #[inline(always)]
    pub(crate) fn swap_sites(&mut self, x: i64, y: i64) {
        let i = (x - self.window_left) as usize;
        let j = (y - self.window_left) as usize;
        self.labels.swap(i, j);
    }

    /// Site of the given label, scanning the window.
    pub fn position_of(&self, label: i64) -> Option<i64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| self.window_left + i as i64)
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Number of inverted adjacent-or-not pairs `(i, j)` with `i < j` but
    /// `position(i) > position(j)`. Quadratic; test use only.
    pub fn inversion_count(&self) -> usize {
        let n = self.labels.len();
        let mut count = 0;
        for a in 0..n {
            for b in a + 1..n {
                if self.labels[a] > self.labels[b] {
                    count += 1;
                }
            }
        }
        count
    }

    /// Projects labels onto the two-type alphabet: negative labels become
    /// first-class particles, label zero a second-class particle, positive
    /// labels holes.
    pub fn project_two_type(&self) -> Configuration {
        let cells: Vec<SiteState> = self
            .labels
            .iter()
            .map(|&l| match l {
                _ if l < 0 => SiteState::FirstClass,
                0 => SiteState::SecondClass,
                _ => SiteState::Hole,
            })
            .collect();
        Configuration::from_cells(self.window_left, &cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SiteState::*;

    #[test]
    fn priority_matches_class_order() {
        assert!(priority(FirstClass, Hole));
        assert!(priority(FirstClass, SecondClass));
        assert!(priority(SecondClass, Hole));
        assert!(!priority(SecondClass, SecondClass));
        assert!(!priority(Hole, FirstClass));
        assert!(!priority(Hole, SecondClass));
        assert!(!priority(SecondClass, FirstClass));
    }

    #[test]
    fn priority_total_on_distinct_values() {
        let all = [Hole, SecondClass, FirstClass];
        for a in all {
            for b in all {
                if a == b {
                    assert!(!priority(a, b));
                } else {
                    assert_ne!(priority(a, b), priority(b, a));
                }
            }
        }
    }

    #[test]
    fn parse_reference_initial_states() {
        // two second-class particles at the origin and site 1
        let c = parse_pattern("P* ** H*").unwrap();
        assert_eq!(c.get(-1), FirstClass);
        assert_eq!(c.get(0), SecondClass);
        assert_eq!(c.get(1), SecondClass);
        assert_eq!(c.get(2), Hole);
        assert_eq!(c.second_class_positions(), vec![0, 1]);

        // distance-two pair
        let c = parse_pattern("P* *o* H*").unwrap();
        assert_eq!(c.second_class_positions(), vec![0, 2]);
        assert_eq!(c.get(1), Hole);

        // single second-class particle at the origin
        let c = parse_pattern("P* * H*").unwrap();
        assert_eq!(c.second_class_positions(), vec![0]);
    }

    #[test]
    fn parse_origin_mark() {
        let c = parse_pattern("P* *o_* H*").unwrap();
        // marked char is the second star, so the body spans sites -2..=0
        assert_eq!(c.second_class_positions(), vec![-2, 0]);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert_eq!(
            parse_pattern("P*  H*").unwrap_err(),
            PatternError::BadStructure
        );
        assert_eq!(
            parse_pattern("** H*").unwrap_err(),
            PatternError::BadStructure
        );
        assert_eq!(
            parse_pattern("P* *x* H*").unwrap_err(),
            PatternError::IllegalChar('x')
        );
        assert_eq!(
            parse_pattern("P* _*_o H*").unwrap_err(),
            PatternError::MultipleOrigins
        );
        assert_eq!(
            parse_pattern("P* *_ H*").unwrap_err(),
            PatternError::DanglingOriginMark
        );
    }

    #[test]
    fn exchange_swaps_and_errors() {
        let mut c = parse_pattern("P* ** H*").unwrap();
        c.exchange(1, 2).unwrap();
        assert_eq!(c.second_class_positions(), vec![0, 2]);
        assert_eq!(
            c.exchange(5, 6).unwrap_err(),
            LatticeError::SiteOutOfWindow {
                site: 5,
                left: -1,
                right: 2
            }
        );
        assert_eq!(
            c.exchange(0, 2).unwrap_err(),
            LatticeError::NotAdjacent { x: 0, y: 2 }
        );
    }

    #[test]
    fn exchange_is_involution() {
        let mut c = parse_pattern("P* .*o* H*").unwrap();
        let before = c.clone();
        c.exchange(0, 1).unwrap();
        c.exchange(0, 1).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn exchange_of_equal_contents_is_identity() {
        let mut c = parse_pattern("P* .** H*").unwrap();
        let before = c.clone();
        c.exchange(1, 2).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn active_bounds_of_adjacent_pair() {
        let c = parse_pattern("P* ** H*").unwrap();
        assert_eq!(c.active_bounds(), (-1, 2));
    }

    #[test]
    fn active_bounds_of_coupled_state() {
        // fully coupled step: holes from the origin onward
        let c = parse_pattern("P* o H*").unwrap();
        assert_eq!(c.active_bounds(), (-1, 0));
    }

    #[test]
    fn ensure_window_keeps_state() {
        let mut c = parse_pattern("P* ** H*").unwrap();
        let before = c.clone();
        c.ensure_window(-40, 40);
        assert!(c.window_left() <= -40);
        assert!(c.window_right() >= 40);
        assert_eq!(c, before);
        c.check_invariants().unwrap();
    }

    #[test]
    fn pattern_round_trip_preserves_state() {
        for text in ["P* ** H*", "P* *o* H*", "P* .*o.* H*", "P* o_*o H*"] {
            let c = parse_pattern(text).unwrap();
            let again = parse_pattern(&c.to_pattern()).unwrap();
            assert_eq!(c, again, "state changed for {text}");
        }
    }

    #[test]
    fn canonical_patterns_survive_format() {
        for text in ["P* ** H*", "P* *o* H*", "P* o_* H*"] {
            let c = parse_pattern(text).unwrap();
            assert_eq!(c.to_pattern(), text);
        }
    }

    #[test]
    fn display_dump_shows_window_and_cells() {
        let c = parse_pattern("P* ** H*").unwrap();
        assert_eq!(format!("{c}"), "[-1,2] .**o");
    }

    #[test]
    fn multi_type_identity_and_projection() {
        let m = MultiTypeConfiguration::identity(3);
        assert_eq!(m.label_at(-3), -3);
        assert_eq!(m.label_at(2), 2);
        assert_eq!(m.position_of(0), Some(0));
        let two = m.project_two_type();
        assert_eq!(two.get(-1), FirstClass);
        assert_eq!(two.get(0), SecondClass);
        assert_eq!(two.get(1), Hole);
    }
}
