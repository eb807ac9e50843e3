//! Template explanations filled from a [`ScoreBreakdown`].
//!
//! Slot mapping: `a` investor, `b` company, `c` closest investor (`CI`),
//! `d` collaborative score (`CB`), `e` closest company (`CC`), `f` content
//! score (`CBS`), `g` first sentence of the closest company's description
//! (`CCB`). Scores are printed with two decimals.
//!
//! When the collaborative gate is closed, or the company has no other
//! training investors, only the company-company and description parts are
//! rendered (the [`Variant::ContentOnly`] form).

use std::fmt::Write as _;

use crate::score::{HybridScorer, ScoreBreakdown, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error("pair ({0:?}, {1:?}) has neither a closest company nor a closest investor")]
    NothingToExplain(String, String),
    #[error("template slot [param {0}] is empty")]
    EmptySlot(char),
    #[error("text does not match the explanation template: {0}")]
    TemplateMismatch(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExplanationParams {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
    pub e: String,
    pub f: String,
    pub g: String,
}

impl ExplanationParams {
    fn slot(&self, name: char) -> &str {
        match name {
            'a' => &self.a,
            'b' => &self.b,
            'c' => &self.c,
            'd' => &self.d,
            'e' => &self.e,
            'f' => &self.f,
            'g' => &self.g,
            _ => unreachable!("template only uses slots a-g"),
        }
    }

    fn slot_mut(&mut self, name: char) -> &mut String {
        match name {
            'a' => &mut self.a,
            'b' => &mut self.b,
            'c' => &mut self.c,
            'd' => &mut self.d,
            'e' => &mut self.e,
            'f' => &mut self.f,
            'g' => &mut self.g,
            _ => unreachable!("template only uses slots a-g"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    ContentOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::ContentOnly => "content_only",
        }
    }

    fn template(self) -> &'static [Piece] {
        match self {
            Variant::Full => FULL,
            Variant::ContentOnly => CONTENT_ONLY,
        }
    }

    fn required(self) -> &'static [char] {
        match self {
            Variant::Full => &['a', 'b', 'c', 'd', 'e', 'f', 'g'],
            Variant::ContentOnly => &['a', 'b', 'e', 'f', 'g'],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub text: String,
    pub params: ExplanationParams,
    pub variant: Variant,
}

#[derive(Debug)]
enum Piece {
    Lit(&'static str),
    Slot(char),
}

use Piece::{Lit, Slot};

const FULL: &[Piece] = &[
    Lit("The investor \""),
    Slot('a'),
    Lit("\" is similar to \""),
    Slot('b'),
    Lit("\"'s previous investor \""),
    Slot('c'),
    Lit("\" with score of \""),
    Slot('d'),
    Lit("\" based on their industry focus preferences. Also, the investor \""),
    Slot('a'),
    Lit("\" has invested in a company named \""),
    Slot('e'),
    Lit("\" with a match score of \""),
    Slot('f'),
    Lit("\" with \""),
    Slot('b'),
    Lit("\". \""),
    Slot('e'),
    Lit("\" also \""),
    Slot('g'),
    Lit("\" similar to \""),
    Slot('b'),
    Lit("\"."),
];

const CONTENT_ONLY: &[Piece] = &[
    Lit("The investor \""),
    Slot('a'),
    Lit("\" has invested in a company named \""),
    Slot('e'),
    Lit("\" with a match score of \""),
    Slot('f'),
    Lit("\" with \""),
    Slot('b'),
    Lit("\". \""),
    Slot('e'),
    Lit("\" also \""),
    Slot('g'),
    Lit("\" similar to \""),
    Slot('b'),
    Lit("\"."),
];

pub fn format_score(x: f64) -> String {
    format!("{x:.2}")
}

/// Copy the slot values out of a breakdown. Nothing is recomputed.
pub fn extract_params(b: &ScoreBreakdown) -> Result<ExplanationParams, ExplainError> {
    if b.cc.is_empty() && b.ci.is_empty() {
        return Err(ExplainError::NothingToExplain(
            b.investor_id.clone(),
            b.company_id.clone(),
        ));
    }
    Ok(ExplanationParams {
        a: b.investor_id.clone(),
        b: b.company_id.clone(),
        c: b.ci.clone(),
        d: format_score(b.cb),
        e: b.cc.clone(),
        f: format_score(b.cbs),
        g: b.ccb.clone(),
    })
}

/// Full when the gate is open and both anchors exist, otherwise content-only.
pub fn choose_variant(b: &ScoreBreakdown) -> Variant {
    if b.gate_open && !b.ci.is_empty() && !b.cc.is_empty() {
        Variant::Full
    } else {
        Variant::ContentOnly
    }
}

pub fn render(params: &ExplanationParams, variant: Variant) -> Result<Explanation, ExplainError> {
    if let Some(&missing) = variant.required().iter().find(|&&s| params.slot(s).is_empty()) {
        return Err(ExplainError::EmptySlot(missing));
    }
    let mut text = String::new();
    for piece in variant.template() {
        match piece {
            Lit(s) => text.push_str(s),
            Slot(s) => text.push_str(params.slot(*s)),
        }
    }
    Ok(Explanation {
        text,
        params: params.clone(),
        variant,
    })
}

/// Recover the slot values from a rendered explanation.
pub fn parse(text: &str, variant: Variant) -> Result<ExplanationParams, ExplainError> {
    let pieces = variant.template();
    let mut params = ExplanationParams::default();
    let mut filled = [false; 7];
    let mut rest = text;
    let mut k = 0;
    while k < pieces.len() {
        match &pieces[k] {
            Lit(lit) => {
                rest = rest.strip_prefix(lit).ok_or_else(|| {
                    ExplainError::TemplateMismatch(format!("expected {lit:?} at {rest:?}"))
                })?;
                k += 1;
            }
            Slot(name) => {
                let Some(Lit(next)) = pieces.get(k + 1) else {
                    unreachable!("every slot is followed by a literal");
                };
                let end = rest.find(next).ok_or_else(|| {
                    ExplainError::TemplateMismatch(format!("unterminated slot {name}"))
                })?;
                let value = &rest[..end];
                let idx = (*name as u8 - b'a') as usize;
                if filled[idx] {
                    if params.slot(*name) != value {
                        return Err(ExplainError::TemplateMismatch(format!(
                            "slot {name} appears with two values"
                        )));
                    }
                } else {
                    *params.slot_mut(*name) = value.to_string();
                    filled[idx] = true;
                }
                rest = &rest[end..];
                k += 1;
            }
        }
    }
    if !rest.is_empty() {
        return Err(ExplainError::TemplateMismatch(format!("trailing text {rest:?}")));
    }
    Ok(params)
}

pub fn explain_breakdown(b: &ScoreBreakdown) -> Result<Explanation, ExplainError> {
    render(&extract_params(b)?, choose_variant(b))
}

/// Score the pair and explain it.
pub fn explain_pair(
    scorer: &HybridScorer,
    investor: &str,
    company: &str,
) -> Result<Explanation, ExplainError> {
    explain_breakdown(&scorer.score_pair(investor, company)?)
}

pub const PARAMS_HEADER: &str = "investor\tcompany\tclosest_investor\tcollaborative_score\tclosest_company\tcontent_score\tclosest_company_business\tvariant";

pub fn format_params_row(e: &Explanation) -> String {
    let p = &e.params;
    let mut s = String::new();
    let _ = write!(
        s,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        p.a,
        p.b,
        p.c,
        p.d,
        p.e,
        p.f,
        p.g,
        e.variant.name()
    );
    s
}
