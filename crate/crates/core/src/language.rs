//! Typed-utterance understanding: filler removal, robust partial parsing into
//! semantic segments, and assembly of an instruction frame.
//!
//! The recognizer vocabulary is a superset of the understanding vocabulary.
//! Words the recognizer knows without any meaning, and words it does not know
//! at all, may still fill the head noun slot of an object description.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{HypothesisId, Relation};
use crate::types::{Color, Kind, Shape, Size};

pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");
pub const DEFAULT_CORPUS: &str = include_str!("../data/corpus.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Take,
    Put,
    Show,
}

impl FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "take" => Ok(Action::Take),
            "put" => Ok(Action::Put),
            "show" => Ok(Action::Show),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Take => "take",
            Action::Put => "put",
            Action::Show => "show",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationWord {
    Left,
    Right,
    Front,
    Behind,
    In,
    Near,
}

impl RelationWord {
    /// The geometric relation this word asserts between two table objects, if any.
    pub fn geometric(self) -> Option<Relation> {
        match self {
            RelationWord::Left => Some(Relation::LeftOf),
            RelationWord::Right => Some(Relation::RightOf),
            RelationWord::Front => Some(Relation::InFrontOf),
            RelationWord::Behind => Some(Relation::Behind),
            RelationWord::Near => Some(Relation::Near),
            RelationWord::In => None,
        }
    }
}

impl FromStr for RelationWord {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left" => Ok(RelationWord::Left),
            "right" => Ok(RelationWord::Right),
            "front" => Ok(RelationWord::Front),
            "behind" => Ok(RelationWord::Behind),
            "in" => Ok(RelationWord::In),
            "near" => Ok(RelationWord::Near),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

/// Understanding category of a lexicon entry, with its semantic value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Action(Action),
    Color(Color),
    Type(Kind),
    Size(Size),
    Shape(Shape),
    Relation(RelationWord),
    Anaphor,
    Article,
    Filler,
    /// Known to the recognizer only.
    Recognition,
}

impl Category {
    fn tag(&self) -> &'static str {
        match self {
            Category::Action(_) => "ACTION",
            Category::Color(_) => "COLOR",
            Category::Type(_) => "TYPE",
            Category::Size(_) => "SIZE",
            Category::Shape(_) => "SHAPE",
            Category::Relation(_) => "RELATION",
            Category::Anaphor => "ANAPHOR",
            Category::Article => "ARTICLE",
            Category::Filler => "FILLER",
            Category::Recognition => "RECOGNITION",
        }
    }

    fn parse(tag: &str, value: &str) -> Result<Category, String> {
        Ok(match tag {
            "ACTION" => Category::Action(value.parse()?),
            "COLOR" => Category::Color(value.parse()?),
            "TYPE" => Category::Type(value.parse()?),
            "SIZE" => Category::Size(value.parse()?),
            "SHAPE" => Category::Shape(value.parse()?),
            "RELATION" => Category::Relation(value.parse()?),
            "ANAPHOR" => Category::Anaphor,
            "ARTICLE" => Category::Article,
            "FILLER" => Category::Filler,
            "RECOGNITION" => Category::Recognition,
            other => return Err(format!("unknown category `{other}`")),
        })
    }

    fn has_semantics(&self) -> bool {
        !matches!(self, Category::Filler | Category::Recognition)
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    /// phrase (space-joined lowercase words) -> category
    entries: BTreeMap<String, Category>,
    /// every word the recognizer can output
    recognition: BTreeSet<String>,
    max_phrase_words: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

impl Lexicon {
    /// Parses `phrase<TAB>CATEGORY[<TAB>value]` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Lexicon> {
        let mut entries = BTreeMap::new();
        let mut recognition = BTreeSet::new();
        let mut max_phrase_words = 1;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Lexicon { line: line_no, msg: "expected 2 or 3 tab-separated fields".into() });
            }
            let phrase = fields[0].trim().to_lowercase();
            let words: Vec<&str> = phrase.split_whitespace().collect();
            if words.is_empty() {
                return Err(Error::Lexicon { line: line_no, msg: "empty phrase".into() });
            }
            let value = fields.get(2).map(|v| v.trim()).unwrap_or(&phrase);
            let category = Category::parse(fields[1].trim(), value)
                .map_err(|msg| Error::Lexicon { line: line_no, msg })?;
            if let Some(prev) = entries.get(&phrase) {
                if *prev != category {
                    return Err(Error::Lexicon { line: line_no, msg: format!("`{phrase}` defined twice") });
                }
            }
            max_phrase_words = max_phrase_words.max(words.len());
            recognition.extend(words.iter().map(|w| w.to_string()));
            entries.insert(words.join(" "), category);
        }
        let lex = Lexicon { entries, recognition, max_phrase_words };
        lex.check()?;
        Ok(lex)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Lexicon> {
        Lexicon::parse(&std::fs::read_to_string(path)?)
    }

    /// Hesitations and noise markers must be fillers; the understanding
    /// vocabulary must be recognizable.
    fn check(&self) -> Result<()> {
        for marker in ["uhm", "uh", "<smack>", "<breath>"] {
            if self.entries.get(marker) != Some(&Category::Filler) {
                return Err(Error::Lexicon { line: 0, msg: format!("`{marker}` must map to FILLER") });
            }
        }
        for phrase in self.entries.keys() {
            if !phrase.split(' ').all(|w| self.recognition.contains(w)) {
                return Err(Error::Lexicon { line: 0, msg: format!("`{phrase}` not recognizable") });
            }
        }
        Ok(())
    }

    pub fn lookup(&self, phrase: &str) -> Option<Category> {
        self.entries.get(phrase).copied()
    }

    pub fn recognizes(&self, word: &str) -> bool {
        self.recognition.contains(word)
    }

    pub fn is_filler(&self, word: &str) -> bool {
        self.lookup(word) == Some(Category::Filler) || (word.starts_with('<') && word.ends_with('>'))
    }

    /// Number of understanding entries (phrases with semantics).
    pub fn understanding_len(&self) -> usize {
        self.entries.values().filter(|c| c.has_semantics()).count()
    }

    pub fn recognition_len(&self) -> usize {
        self.recognition.len()
    }

    /// Longest phrase with semantics starting at `tokens[at]`.
    fn longest_match(&self, tokens: &[Token], at: usize) -> Option<(usize, Category)> {
        let max = self.max_phrase_words.min(tokens.len() - at);
        (1..=max).rev().find_map(|len| {
            let phrase = tokens[at..at + len].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            self.lookup(&phrase).filter(|c| c.has_semantics()).map(|c| (len, c))
        })
    }

    fn single_words(&self) -> impl Iterator<Item = (&String, &Category)> {
        self.entries.iter().filter(|(p, _)| !p.contains(' '))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Not in the recognition lexicon.
    pub oov: bool,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.oov {
            write!(f, "{}(OOV)", self.text)
        } else {
            f.write_str(&self.text)
        }
    }
}

fn clean_word(raw: &str) -> String {
    let lower = raw.to_lowercase();
    if lower.starts_with('<') && lower.ends_with('>') {
        return lower;
    }
    lower
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '<' && c != '>' && c != '-')
        .to_string()
}

/// Lowercases, strips punctuation and drops hesitations and noise markers.
pub fn normalize(utterance: &str, lexicon: &Lexicon) -> Result<Vec<Token>> {
    let tokens: Vec<Token> = utterance
        .split_whitespace()
        .map(clean_word)
        .filter(|w| !w.is_empty() && !lexicon.is_filler(w))
        .map(|w| Token { oov: !lexicon.recognizes(&w), text: w })
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    Ok(tokens)
}

/// Attributes of a described object; `None` means the slot was not filled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDescription {
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<Size>,
    /// Head noun without understanding semantics (type stays unknown).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noun: Option<String>,
}

impl ObjectDescription {
    pub fn is_unknown(&self) -> bool {
        self.kind.is_none() && self.color.is_none() && self.shape.is_none() && self.size.is_none()
    }

    /// Short English rendering, e.g. "the red cube".
    pub fn describe(&self) -> String {
        let mut words = vec!["the".to_string()];
        if let Some(s) = self.size {
            words.push(s.to_string());
        }
        if let Some(c) = self.color {
            words.push(c.to_string());
        }
        match (self.kind, &self.noun) {
            (Some(k), _) => words.push(k.to_string()),
            (None, Some(n)) => words.push(n.clone()),
            (None, None) => words.push("object".into()),
        }
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentCategory {
    #[serde(rename = "S_ACTION")]
    Action,
    #[serde(rename = "S_OBJECT")]
    Object,
    #[serde(rename = "S_RELATION")]
    Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "category")]
pub enum SegmentSlots {
    #[serde(rename = "S_ACTION")]
    Action { action: Action },
    #[serde(rename = "S_OBJECT")]
    Object { description: ObjectDescription, anaphor: bool },
    #[serde(rename = "S_RELATION")]
    Relation { relation: RelationWord },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticSegment {
    /// Half-open token range `[start, end)`.
    pub span: (usize, usize),
    pub words: Vec<String>,
    pub slots: SegmentSlots,
}

impl SemanticSegment {
    pub fn category(&self) -> SegmentCategory {
        match self.slots {
            SegmentSlots::Action { .. } => SegmentCategory::Action,
            SegmentSlots::Object { .. } => SegmentCategory::Object,
            SegmentSlots::Relation { .. } => SegmentCategory::Relation,
        }
    }
}

struct OpenObject {
    start: usize,
    words: Vec<String>,
    description: ObjectDescription,
    anaphor: bool,
    has_head: bool,
}

impl OpenObject {
    fn new(start: usize) -> Self {
        OpenObject { start, words: Vec::new(), description: ObjectDescription::default(), anaphor: false, has_head: false }
    }

    fn close(self, end: usize) -> SemanticSegment {
        SemanticSegment {
            span: (self.start, end),
            words: self.words,
            slots: SegmentSlots::Object { description: self.description, anaphor: self.anaphor },
        }
    }
}

/// Greedy left-to-right segmentation. Never fails: tokens that fit no
/// segment are skipped.
pub fn partial_parse(tokens: &[Token], lexicon: &Lexicon) -> Vec<SemanticSegment> {
    let mut segments = Vec::new();
    let mut open: Option<OpenObject> = None;
    // end index of the last token absorbed into the open object
    let mut open_end = 0;
    let mut i = 0;

    macro_rules! flush {
        () => {
            if let Some(obj) = open.take() {
                segments.push(obj.close(open_end));
            }
        };
    }

    while i < tokens.len() {
        let Some((len, category)) = lexicon.longest_match(tokens, i) else {
            // open noun slot: a word without semantics heads a started description
            if let Some(obj) = open.as_mut().filter(|o| !o.has_head) {
                obj.description.noun = Some(tokens[i].text.clone());
                obj.words.push(tokens[i].text.clone());
                obj.has_head = true;
                open_end = i + 1;
            }
            i += 1;
            continue;
        };
        let words: Vec<String> = tokens[i..i + len].iter().map(|t| t.text.clone()).collect();
        match category {
            Category::Action(action) => {
                flush!();
                segments.push(SemanticSegment { span: (i, i + len), words, slots: SegmentSlots::Action { action } });
            }
            Category::Relation(relation) => {
                flush!();
                segments.push(SemanticSegment { span: (i, i + len), words, slots: SegmentSlots::Relation { relation } });
            }
            Category::Anaphor => {
                flush!();
                let mut obj = OpenObject::new(i);
                obj.words = words;
                obj.anaphor = true;
                obj.has_head = true;
                open = Some(obj);
                open_end = i + len;
            }
            Category::Article | Category::Color(_) | Category::Size(_) | Category::Shape(_) | Category::Type(_) => {
                if open.as_ref().is_some_and(|o| o.has_head) {
                    flush!();
                }
                let obj = open.get_or_insert_with(|| OpenObject::new(i));
                obj.words.extend(words);
                let d = &mut obj.description;
                match category {
                    Category::Color(c) => {
                        d.color.get_or_insert(c);
                    }
                    Category::Size(s) => {
                        d.size.get_or_insert(s);
                    }
                    Category::Shape(s) => {
                        d.shape.get_or_insert(s);
                    }
                    Category::Type(k) => {
                        d.kind = Some(k);
                        obj.has_head = true;
                    }
                    _ => {}
                }
                open_end = i + len;
            }
            Category::Filler | Category::Recognition => unreachable!("no semantics"),
        }
        i += len;
    }
    flush!();
    segments
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub relation: RelationWord,
    pub object: ObjectDescription,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionFrame {
    pub action: Option<Action>,
    pub intended: ObjectDescription,
    pub anaphoric: bool,
    pub references: Vec<Reference>,
    pub raw: String,
    /// Further actions in the same utterance; only the first one is acted upon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignored_actions: Vec<Action>,
    /// Memory hypothesis the intended object was bound to by anaphora resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intended_id: Option<HypothesisId>,
}

impl InstructionFrame {
    pub fn is_well_formed(&self) -> bool {
        self.action.is_some()
    }

    /// First color named anywhere in the frame.
    pub fn mentioned_color(&self) -> Option<Color> {
        self.intended.color.or_else(|| self.references.iter().find_map(|r| r.object.color))
    }
}

pub fn build_frame(segments: &[SemanticSegment], raw: &str) -> Result<InstructionFrame> {
    let action_pos = segments.iter().position(|s| s.category() == SegmentCategory::Action);
    let any_object = segments.iter().any(|s| s.category() == SegmentCategory::Object);
    if action_pos.is_none() && !any_object {
        return Err(Error::Uninterpretable);
    }
    let mut actions = segments.iter().filter_map(|s| match s.slots {
        SegmentSlots::Action { action } => Some(action),
        _ => None,
    });
    let action = actions.next();
    let ignored_actions: Vec<Action> = actions.collect();

    let is_object = |s: &SemanticSegment| s.category() == SegmentCategory::Object;
    let from = action_pos.map_or(0, |p| p + 1);
    let intended_pos = segments[from..]
        .iter()
        .position(is_object)
        .map(|p| p + from)
        .or_else(|| segments.iter().position(is_object));

    let (intended, anaphoric) = match intended_pos.map(|p| &segments[p].slots) {
        Some(SegmentSlots::Object { description, anaphor }) => {
            if *anaphor {
                (ObjectDescription::default(), true)
            } else {
                (description.clone(), false)
            }
        }
        _ => (ObjectDescription::default(), false),
    };

    let mut references = Vec::new();
    let start = intended_pos.map_or(from, |p| p + 1);
    let mut k = start;
    while k + 1 < segments.len() {
        if let (SegmentSlots::Relation { relation }, SegmentSlots::Object { description, .. }) =
            (&segments[k].slots, &segments[k + 1].slots)
        {
            references.push(Reference { relation: *relation, object: description.clone() });
            k += 2;
        } else {
            k += 1;
        }
    }

    Ok(InstructionFrame {
        action,
        intended,
        anaphoric,
        references,
        raw: raw.to_string(),
        ignored_actions,
        intended_id: None,
    })
}

/// normalize, partial_parse and build_frame in sequence.
pub fn understand(utterance: &str, lexicon: &Lexicon) -> Result<InstructionFrame> {
    let tokens = normalize(utterance, lexicon)?;
    build_frame(&partial_parse(&tokens, lexicon), utterance)
}

/// Simulated recognition errors: each non-filler word is, with probability
/// `error_rate`, replaced by a confusable word of the same category or deleted.
pub fn corrupt(utterance: &str, error_rate: f64, seed: u64, lexicon: &Lexicon) -> String {
    if error_rate <= 0.0 {
        return utterance.to_string();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corrupt_with(utterance, error_rate, &mut rng, lexicon)
}

pub fn corrupt_with(utterance: &str, error_rate: f64, rng: &mut impl Rng, lexicon: &Lexicon) -> String {
    let mut out = Vec::new();
    for raw in utterance.split_whitespace() {
        let word = clean_word(raw);
        if word.is_empty() || lexicon.is_filler(&word) || !rng.gen_bool(error_rate.clamp(0.0, 1.0)) {
            out.push(raw.to_string());
            continue;
        }
        let substitute = rng.gen_bool(0.5);
        if substitute {
            if let Some(alt) = confusable(&word, lexicon, rng) {
                out.push(alt);
            }
        }
    }
    out.join(" ")
}

fn confusable(word: &str, lexicon: &Lexicon, rng: &mut impl Rng) -> Option<String> {
    let category = lexicon.lookup(word).filter(|c| *c != Category::Filler)?;
    let same_tag: Vec<(&String, &Category)> = lexicon
        .single_words()
        .filter(|(w, c)| c.tag() == category.tag() && w.as_str() != word)
        .collect();
    let different_value: Vec<&String> =
        same_tag.iter().filter(|(_, c)| **c != category).map(|(w, _)| *w).collect();
    let pool: Vec<&String> =
        if different_value.is_empty() { same_tag.iter().map(|(w, _)| *w).collect() } else { different_value };
    if pool.is_empty() {
        return None;
    }
    Some(pool[rng.gen_range(0..pool.len())].clone())
}

/// Gold annotation for one corpus utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldFrame {
    pub action: Option<Action>,
    #[serde(default)]
    pub intended: ObjectDescription,
    #[serde(default)]
    pub anaphoric: bool,
    #[serde(default)]
    pub references: Vec<Reference>,
}

impl GoldFrame {
    pub fn from_frame(frame: &InstructionFrame) -> GoldFrame {
        GoldFrame {
            action: frame.action,
            intended: frame.intended.clone(),
            anaphoric: frame.anaphoric,
            references: frame.references.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub line: usize,
    pub utterance: String,
    /// `None` marks an utterance that must be rejected as uninterpretable.
    pub gold: Option<GoldFrame>,
}

/// Parses `utterance<TAB>gold` lines, where gold is a JSON frame or the word `ERROR`.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (utt, gold) = line
            .split_once('\t')
            .ok_or_else(|| Error::Lexicon { line: i + 1, msg: "corpus line needs a TAB".into() })?;
        let gold = match gold.trim() {
            "ERROR" => None,
            json => Some(serde_json::from_str(json).map_err(|e| Error::Lexicon { line: i + 1, msg: e.to_string() })?),
        };
        out.push(CorpusEntry { line: i + 1, utterance: utt.to_string(), gold });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMismatch {
    pub line: usize,
    pub utterance: String,
    pub expected: Option<GoldFrame>,
    pub got: Option<GoldFrame>,
}

/// Runs every corpus utterance through the understanding pipeline.
pub fn check_corpus(entries: &[CorpusEntry], lexicon: &Lexicon) -> Vec<CorpusMismatch> {
    entries
        .iter()
        .filter_map(|e| {
            let got = understand(&e.utterance, lexicon).ok().map(|f| GoldFrame::from_frame(&f));
            (got != e.gold).then(|| CorpusMismatch {
                line: e.line,
                utterance: e.utterance.clone(),
                expected: e.gold.clone(),
                got,
            })
        })
        .collect()
}
