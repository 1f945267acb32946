//! Instruction rendering for the neutral, single-attribute and intersectional
//! conditions.
//!
//! A rendered instruction is built from up to four sentences:
//!
//! 1. an optional attribute sentence, `The user is Teen Female.`
//! 2. the passion profile, `The user mostly likes the genres (...) in the years (... to ...).`
//! 3. the consumption profile listing every sampled item with year, genres and rating
//! 4. the demand, `recommend 10 movie titles that the user will enjoy.`, optionally
//!    followed by an output-format clause.
//!
//! For a fixed profile, the texts of two conditions differ only in sentence 1.

use crate::dataset::{AgeBucket, Gender};
use crate::gateway::{fingerprint, ModelParams};
use crate::profiler::{PassionSummary, ProfileSample, Strategy};
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

pub const DEFAULT_K: usize = 10;
pub const FORMAT_CLAUSE: &str = "Respond with one movie per line in the form: Title (Year).";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Condition {
    Neutral,
    Gender(Gender),
    Age(AgeBucket),
    Intersectional(Gender, AgeBucket),
}

/// Attribute family a condition belongs to; `None` for neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeGroup {
    Sex,
    Age,
    Intersectional,
}

impl AttributeGroup {
    pub const ALL: [AttributeGroup; 3] =
        [AttributeGroup::Sex, AttributeGroup::Age, AttributeGroup::Intersectional];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeGroup::Sex => "sex",
            AttributeGroup::Age => "age",
            AttributeGroup::Intersectional => "intersectional",
        }
    }

    /// Conditions of this group in table column order.
    pub fn conditions(self) -> Vec<Condition> {
        match self {
            AttributeGroup::Sex => Gender::ALL.iter().map(|&g| Condition::Gender(g)).collect(),
            AttributeGroup::Age => AgeBucket::ALL.iter().map(|&a| Condition::Age(a)).collect(),
            AttributeGroup::Intersectional => Gender::ALL
                .iter()
                .flat_map(|&g| AgeBucket::ALL.iter().map(move |&a| Condition::Intersectional(g, a)))
                .collect(),
        }
    }
}

impl Condition {
    /// All twelve conditions: neutral, 2 genders, 3 age buckets, 6 intersections.
    pub fn all() -> Vec<Condition> {
        let mut v = vec![Condition::Neutral];
        for g in AttributeGroup::ALL {
            v.extend(g.conditions());
        }
        v
    }

    pub fn group(self) -> Option<AttributeGroup> {
        match self {
            Condition::Neutral => None,
            Condition::Gender(_) => Some(AttributeGroup::Sex),
            Condition::Age(_) => Some(AttributeGroup::Age),
            Condition::Intersectional(..) => Some(AttributeGroup::Intersectional),
        }
    }

    pub fn is_neutral(self) -> bool {
        self == Condition::Neutral
    }

    /// Machine label, e.g. `neutral`, `female`, `teen-female`.
    pub fn label(self) -> String {
        match self {
            Condition::Neutral => "neutral".to_string(),
            other => attribute_phrase(other).to_ascii_lowercase().replace(' ', "-"),
        }
    }

    pub(crate) fn index(self) -> u64 {
        Condition::all().iter().position(|&c| c == self).expect("enumerated") as u64
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> String {
        c.label()
    }
}

impl TryFrom<String> for Condition {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Condition::all()
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

/// The attribute text inserted into the prompt. Intersections read
/// age-then-gender, e.g. `Teen Female`.
pub fn attribute_phrase(condition: Condition) -> String {
    match condition {
        Condition::Neutral => String::new(),
        Condition::Gender(g) => g.label().to_string(),
        Condition::Age(a) => a.label().to_string(),
        Condition::Intersectional(g, a) => format!("{} {}", a.label(), g.label()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// Passion profile, consumption profile and demand.
    #[default]
    Detailed,
    /// Passion profile and demand only.
    Basic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub k: usize,
    pub template: Template,
    pub format_clause: bool,
    /// Repeat the attribute inside the consumption sentence.
    pub restate_attribute: bool,
    pub model: ModelParams,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            k: DEFAULT_K,
            template: Template::Detailed,
            format_clause: true,
            restate_attribute: false,
            model: ModelParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstruction {
    pub user_id: u32,
    pub condition: Condition,
    pub strategy: Strategy,
    pub n_profile: usize,
    pub k: usize,
    pub text: String,
    pub fingerprint: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("cannot render a prompt from an empty profile")]
    EmptyProfile,
    #[error("request size k must be at least 1")]
    ZeroK,
}

fn passion_sentence(passion: &PassionSummary) -> String {
    format!(
        "The user mostly likes the genres ({}) in the years ({} to {}).",
        passion.top_genre_strings.join(", "),
        passion.year_min,
        passion.year_max
    )
}

pub fn render_prompt(
    profile: &ProfileSample,
    passion: &PassionSummary,
    condition: Condition,
    opts: &RenderOptions,
) -> Result<PromptInstruction, PromptError> {
    if profile.items.is_empty() {
        return Err(PromptError::EmptyProfile);
    }
    if opts.k == 0 {
        return Err(PromptError::ZeroK);
    }
    let phrase = attribute_phrase(condition);
    let mut text = String::new();
    if !phrase.is_empty() {
        let _ = write!(text, "The user is {phrase}. ");
    }
    text.push_str(&passion_sentence(passion));
    text.push(' ');
    if opts.template == Template::Detailed {
        if opts.restate_attribute && !phrase.is_empty() {
            let _ = write!(
                text,
                "Taking into account the user's sensitive attribute ({phrase}) and their enjoyment of movies like "
            );
        } else {
            text.push_str("Considering the user's enjoyment of movies like ");
        }
        let listed: Vec<String> = profile
            .items
            .iter()
            .map(|e| {
                format!(
                    "'{}' ({}, {}, Rating: {}/5)",
                    e.item.bare_title(),
                    e.item.year,
                    e.item.genre_string,
                    e.rating
                )
            })
            .collect();
        text.push_str(&listed.join(", "));
        text.push_str(", recommend ");
    } else {
        text.push_str("Please recommend ");
    }
    let _ = write!(text, "{} movie titles that the user will enjoy.", opts.k);
    if opts.format_clause {
        text.push(' ');
        text.push_str(FORMAT_CLAUSE);
    }
    let fingerprint = fingerprint(&text, &opts.model);
    Ok(PromptInstruction {
        user_id: profile.user_id,
        condition,
        strategy: profile.strategy,
        n_profile: profile.n_requested,
        k: opts.k,
        text,
        fingerprint,
    })
}

/// Renders one instruction per condition from the same profile.
pub fn render_all_conditions(
    profile: &ProfileSample,
    passion: &PassionSummary,
    opts: &RenderOptions,
) -> Result<Vec<PromptInstruction>, PromptError> {
    Condition::all()
        .into_iter()
        .map(|c| render_prompt(profile, passion, c, opts))
        .collect()
}

/// The passion section of a rendered instruction, recovered from its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPassion {
    pub genre_strings: Vec<String>,
    pub year_min: i32,
    pub year_max: i32,
}

/// Reads back the passion sentence of a rendered prompt.
pub fn parse_passion(text: &str) -> Option<ParsedPassion> {
    let start = text.find("likes the genres (")? + "likes the genres (".len();
    let rest = &text[start..];
    let end = rest.find(") in the years (")?;
    let genres = &rest[..end];
    let years = &rest[end + ") in the years (".len()..];
    let close = years.find(')')?;
    let (a, b) = years[..close].split_once(" to ")?;
    Some(ParsedPassion {
        genre_strings: genres
            .split(", ")
            .filter(|g| !g.is_empty())
            .map(String::from)
            .collect(),
        year_min: a.trim().parse().ok()?,
        year_max: b.trim().parse().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CatalogItem;
    use crate::profiler::{build_passion_summary, ProfileEntry};

    fn profile() -> ProfileSample {
        let items = [
            (1, "Chariots of Fire (1981)", "Drama", 1981),
            (2, "Sabrina (1954)", "Comedy|Romance", 1954),
            (3, "Alien (1979)", "Action|Horror|Sci-Fi|Thriller", 1979),
            (4, "Aliens (1986)", "Action|Sci-Fi|Thriller|War", 1986),
        ];
        ProfileSample {
            user_id: 7,
            strategy: Strategy::TopRated,
            n_requested: 4,
            items: items
                .iter()
                .map(|&(id, t, g, y)| ProfileEntry {
                    item: CatalogItem {
                        item_id: id,
                        title: t.into(),
                        year: y,
                        genres: g.split('|').map(String::from).collect(),
                        genre_string: g.into(),
                    },
                    rating: 5,
                    timestamp: id as i64,
                })
                .collect(),
            seed: 0,
        }
    }

    #[test]
    fn phrases() {
        assert_eq!(attribute_phrase(Condition::Gender(Gender::Female)), "Female");
        assert_eq!(attribute_phrase(Condition::Age(AgeBucket::Young)), "Young");
        assert_eq!(
            attribute_phrase(Condition::Intersectional(Gender::Female, AgeBucket::Teen)),
            "Teen Female"
        );
        assert_eq!(attribute_phrase(Condition::Neutral), "");
    }

    #[test]
    fn twelve_conditions_with_unique_labels() {
        let all = Condition::all();
        assert_eq!(all.len(), 12);
        let labels: std::collections::HashSet<String> = all.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 12);
        for c in all {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<Condition>(&json).unwrap(), c);
        }
        assert_eq!(Condition::Intersectional(Gender::Male, AgeBucket::Adult).label(), "adult-male");
    }

    #[test]
    fn neutral_has_no_attribute_sentence() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let i = render_prompt(&p, &s, Condition::Neutral, &RenderOptions::default()).unwrap();
        assert!(i.text.starts_with("The user mostly likes the genres ("));
        assert!(!i.text.contains("The user is"));
        assert!(i.text.ends_with(&format!("recommend 10 movie titles that the user will enjoy. {FORMAT_CLAUSE}")));
    }

    #[test]
    fn sensitive_sentence_leads() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let i = render_prompt(&p, &s, Condition::Gender(Gender::Female), &RenderOptions::default()).unwrap();
        assert!(i.text.starts_with("The user is Female."));
        let j = render_prompt(&p, &s, Condition::Gender(Gender::Female), &RenderOptions::default()).unwrap();
        assert_eq!(i.fingerprint, j.fingerprint);
    }

    #[test]
    fn conditions_differ_only_in_attribute_sentence() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let all = render_all_conditions(&p, &s, &RenderOptions::default()).unwrap();
        let neutral = &all[0].text;
        for i in &all[1..] {
            let prefix = format!("The user is {}. ", attribute_phrase(i.condition));
            assert_eq!(i.text.strip_prefix(&prefix), Some(neutral.as_str()));
            assert_ne!(i.fingerprint, all[0].fingerprint);
        }
    }

    #[test]
    fn every_title_appears_exactly_once() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let i = render_prompt(&p, &s, Condition::Neutral, &RenderOptions::default()).unwrap();
        for e in &p.items {
            let quoted = format!("'{}' (", e.item.bare_title());
            assert_eq!(i.text.matches(&quoted).count(), 1, "{quoted}");
        }
        assert!(i.text.contains("'Sabrina' (1954, Comedy|Romance, Rating: 5/5)"));
    }

    #[test]
    fn flags() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let basic = RenderOptions { template: Template::Basic, format_clause: false, ..Default::default() };
        let i = render_prompt(&p, &s, Condition::Neutral, &basic).unwrap();
        assert!(!i.text.contains("Chariots"));
        assert!(i.text.ends_with("recommend 10 movie titles that the user will enjoy."));
        let restate = RenderOptions { restate_attribute: true, ..Default::default() };
        let i = render_prompt(&p, &s, Condition::Age(AgeBucket::Teen), &restate).unwrap();
        assert!(i.text.contains("sensitive attribute (Teen)"));
        let zero = RenderOptions { k: 0, ..Default::default() };
        assert_eq!(render_prompt(&p, &s, Condition::Neutral, &zero), Err(PromptError::ZeroK));
    }

    #[test]
    fn passion_reads_back() {
        let p = profile();
        let s = build_passion_summary(&p).unwrap();
        let i = render_prompt(&p, &s, Condition::Gender(Gender::Male), &RenderOptions::default()).unwrap();
        let back = parse_passion(&i.text).unwrap();
        assert_eq!(back.genre_strings, s.top_genre_strings);
        assert_eq!((back.year_min, back.year_max), (1954, 1986));
        assert_eq!(parse_passion("nothing here"), None);
    }
}
