//! Recursive-descent parser and validator for scenario documents.
//!
//! Parsing collects diagnostics instead of stopping at the first problem:
//! a failed declaration skips ahead to the next declaration keyword. At
//! most [`MAX_DIAGNOSTICS`] errors are reported per document.
//!
//! Duplicate ids, ranges, and arities are checked while parsing, where the
//! offending token is at hand. References (link endpoints, picture parts,
//! realizers of situation / goal / query features, attention targets, plan
//! entries) are resolved afterwards, because declarations may appear in any
//! order.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, Tok, Token};
use super::{
    AttentionDecl, ErrorKind, GoalDecl, GroupDecl, LinkDecl, ParseError, PictureDecl,
    PlanEntryDecl, QueryDecl, Ref, ScenarioDoc, SituationDecl, Span, SpannedTag,
};
use crate::pictures::FeatureTag;
use crate::substrate::{ConnectionKind, Polarity};

/// Most diagnostics a single parse reports.
pub const MAX_DIAGNOSTICS: usize = 20;

const DECL_KEYWORDS: [&str; 8] = [
    "group",
    "link",
    "picture",
    "situation",
    "goal",
    "query",
    "attention",
    "compose",
];

/// Parses and validates a document. `Ok` means zero diagnostics.
pub fn parse(text: &str) -> Result<ScenarioDoc, Vec<ParseError>> {
    let (tokens, mut errors) = lex(text);
    let mut parser = Parser {
        tokens,
        pos: 0,
        errors: Vec::new(),
        doc: ScenarioDoc::empty(),
        group_names: BTreeMap::new(),
        picture_ids: BTreeMap::new(),
        situation_cases: BTreeSet::new(),
        realizers: BTreeMap::new(),
    };
    parser.document();
    errors.append(&mut parser.errors);
    errors.truncate(MAX_DIAGNOSTICS);
    if errors.is_empty() {
        validate(&parser.doc, &mut errors);
        errors.truncate(MAX_DIAGNOSTICS);
    }
    if errors.is_empty() {
        Ok(parser.doc)
    } else {
        Err(errors)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    doc: ScenarioDoc,
    group_names: BTreeMap<String, Span>,
    picture_ids: BTreeMap<String, Span>,
    situation_cases: BTreeSet<Option<String>>,
    realizers: BTreeMap<FeatureTag, String>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => Span {
                line: t.line,
                column: t.column,
            },
            None => self
                .tokens
                .last()
                .map(|t| Span {
                    line: t.line,
                    column: t.column,
                })
                .unwrap_or(Span { line: 1, column: 1 }),
        }
    }

    fn error(&mut self, span: Span, kind: ErrorKind, message: impl Into<String>) {
        if self.errors.len() < MAX_DIAGNOSTICS {
            self.errors.push(ParseError {
                line: span.line,
                column: span.column,
                kind,
                message: message.into(),
            });
        }
    }

    fn error_here(&mut self, kind: ErrorKind, message: impl Into<String>) {
        let span = self.here();
        self.error(span, kind, message);
    }

    /// Skips tokens until the next declaration keyword.
    fn synchronize(&mut self) {
        while let Some(t) = self.peek() {
            if let Tok::Ident(name) = &t.tok {
                if DECL_KEYWORDS.contains(&name.as_str()) {
                    return;
                }
            }
            self.pos += 1;
        }
    }

    fn expect_ident(&mut self, what: &str) -> Option<(String, Span)> {
        let span = self.here();
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Some((name, span))
            }
            Some(other) => {
                self.error(span, ErrorKind::Syntax, format!(
                    "expected {what}, found {}",
                    other.describe()
                ));
                None
            }
            None => {
                self.error(span, ErrorKind::Syntax, format!("expected {what}, found end of input"));
                None
            }
        }
    }

    fn expect_tok(&mut self, tok: Tok, what: &str) -> bool {
        let span = self.here();
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                true
            }
            Some(t) => {
                let found = t.tok.describe();
                self.error(span, ErrorKind::Syntax, format!("expected {what}, found {found}"));
                false
            }
            None => {
                self.error(span, ErrorKind::Syntax, format!("expected {what}, found end of input"));
                false
            }
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) if name == word => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_number(&mut self, what: &str) -> Option<(f64, String, Span)> {
        let span = self.here();
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Number { value, raw }) => {
                self.pos += 1;
                Some((value, raw, span))
            }
            Some(other) => {
                self.error(span, ErrorKind::Syntax, format!(
                    "expected {what}, found {}",
                    other.describe()
                ));
                None
            }
            None => {
                self.error(span, ErrorKind::Syntax, format!("expected {what}, found end of input"));
                None
            }
        }
    }

    /// `feature := ["!"] IDENT`
    fn feature(&mut self) -> Option<SpannedTag> {
        let span = self.here();
        let denied = matches!(
            self.peek(),
            Some(Token {
                tok: Tok::Bang,
                ..
            })
        );
        if denied {
            self.pos += 1;
        }
        let (name, _) = self.expect_ident("a feature name")?;
        let tag = if denied {
            FeatureTag::denied(name)
        } else {
            FeatureTag::asserted(name)
        };
        Some(SpannedTag { tag, span })
    }

    fn feature_list(&mut self, what: &str) -> Vec<SpannedTag> {
        let mut tags = Vec::new();
        let start = self.here();
        while let Some(tag) = self.feature() {
            tags.push(tag);
            if !self.keyword_comma() {
                break;
            }
        }
        if tags.is_empty() {
            self.error(start, ErrorKind::Arity, format!("{what} must list at least one feature"));
        }
        tags
    }

    fn keyword_comma(&mut self) -> bool {
        match self.peek() {
            Some(Token {
                tok: Tok::Comma, ..
            }) => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn id_list(&mut self, what: &str) -> Vec<Ref> {
        let mut ids = Vec::new();
        let start = self.here();
        while let Some((name, span)) = self.expect_ident(what) {
            ids.push(Ref { name, span });
            if !self.keyword_comma() {
                break;
            }
        }
        if ids.is_empty() {
            self.error(start, ErrorKind::Arity, format!("expected at least one {what}"));
        }
        ids
    }

    fn document(&mut self) {
        if self.keyword("scenario") {
            let span = self.here();
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Str(name)) => {
                    self.pos += 1;
                    self.doc.name = name;
                }
                _ => {
                    self.error(span, ErrorKind::Syntax, "expected a quoted scenario name");
                    self.synchronize();
                }
            }
        } else {
            self.error_here(ErrorKind::Syntax, "a document starts with `scenario \"name\"`");
            self.synchronize();
        }

        while self.peek().is_some() {
            if self.errors.len() >= MAX_DIAGNOSTICS {
                return;
            }
            let before = self.pos;
            self.declaration();
            if self.pos == before {
                // Nothing consumed: drop one token to guarantee progress.
                self.pos += 1;
                self.synchronize();
            }
        }
    }

    fn declaration(&mut self) {
        let span = self.here();
        let word = match self.peek() {
            Some(Token {
                tok: Tok::Ident(w), ..
            }) => w.clone(),
            Some(t) => {
                let found = t.tok.describe();
                self.error(span, ErrorKind::Syntax, format!(
                    "expected a declaration keyword, found {found}"
                ));
                self.pos += 1;
                self.synchronize();
                return;
            }
            None => return,
        };
        match word.as_str() {
            "group" => {
                self.pos += 1;
                self.group_decl();
            }
            "link" => {
                self.pos += 1;
                self.link_decl();
            }
            "picture" => {
                self.pos += 1;
                self.picture_decl();
            }
            "situation" => {
                self.pos += 1;
                self.situation_decl();
            }
            "goal" => {
                self.pos += 1;
                self.goal_decl();
            }
            "query" => {
                self.pos += 1;
                self.query_decl();
            }
            "attention" => {
                self.pos += 1;
                self.attention_decl();
            }
            "compose" => {
                self.pos += 1;
                self.compose_decl();
            }
            other => {
                self.error(span, ErrorKind::Syntax, format!(
                    "expected a declaration keyword, found `{other}`"
                ));
                self.pos += 1;
                self.synchronize();
            }
        }
    }

    fn declare_id(&mut self, name: &str, span: Span, kind: &str) {
        let clash = self.group_names.contains_key(name) || self.picture_ids.contains_key(name);
        if clash {
            self.error(span, ErrorKind::DuplicateId, format!(
                "{kind} `{name}` is already declared"
            ));
        }
    }

    fn group_decl(&mut self) {
        let Some((name, span)) = self.expect_ident("a group name") else {
            self.synchronize();
            return;
        };
        self.declare_id(&name, span, "group");
        let mut size = 1usize;
        let mut features: Vec<FeatureTag> = Vec::new();
        loop {
            if self.keyword("size") {
                if let Some((value, raw, nspan)) = self.expect_number("a group size") {
                    if value.fract() != 0.0 || value < 1.0 {
                        self.error(nspan, ErrorKind::Range, format!(
                            "group size must be a positive integer, got `{raw}`"
                        ));
                    } else {
                        size = value as usize;
                    }
                } else {
                    self.synchronize();
                    return;
                }
            } else if self.keyword("feature") {
                for spanned in self.feature_list("a group's feature clause") {
                    match self.realizers.get(&spanned.tag) {
                        Some(_) => {
                            let label = spanned.tag.to_string();
                            self.error(spanned.span, ErrorKind::DuplicateId, format!(
                                "feature `{label}` already has a realizing group"
                            ));
                        }
                        None => {
                            self.realizers.insert(spanned.tag.clone(), name.clone());
                            features.push(spanned.tag);
                        }
                    }
                }
            } else {
                break;
            }
        }
        self.group_names.insert(name.clone(), span);
        self.doc.groups.push(GroupDecl {
            name,
            size,
            features,
        });
    }

    fn link_decl(&mut self) {
        let Some((source, sspan)) = self.expect_ident("a source group") else {
            self.synchronize();
            return;
        };
        let polarity = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::ExcArrow) => {
                self.pos += 1;
                Polarity::Excitatory
            }
            Some(Tok::InhArrow) => {
                self.pos += 1;
                Polarity::Inhibitory
            }
            _ => {
                self.error_here(ErrorKind::Syntax, "expected `->` or `-|`");
                self.synchronize();
                return;
            }
        };
        let Some((target, tspan)) = self.expect_ident("a target group") else {
            self.synchronize();
            return;
        };
        if !self.expect_tok(Tok::Colon, "`:` before the link weight") {
            self.synchronize();
            return;
        }
        let Some((weight, raw, wspan)) = self.expect_number("a link weight") else {
            self.synchronize();
            return;
        };
        if !weight.is_finite() || weight < 0.0 {
            self.error(wspan, ErrorKind::Range, format!(
                "link weight must be finite and non-negative, got `{raw}`"
            ));
        }
        let mut kind = ConnectionKind::Association;
        if self.keyword("kind") {
            if let Some((word, kspan)) = self.expect_ident("a connection kind") {
                match word.as_str() {
                    "association" => kind = ConnectionKind::Association,
                    "inference" => kind = ConnectionKind::Inference,
                    "kinship" => kind = ConnectionKind::Kinship,
                    "development" => kind = ConnectionKind::Development,
                    "binding" => kind = ConnectionKind::Binding,
                    other => self.error(kspan, ErrorKind::UnknownReference, format!(
                        "`{other}` is not a connection kind"
                    )),
                }
            }
        }
        self.doc.links.push(LinkDecl {
            source: Ref {
                name: source,
                span: sspan,
            },
            target: Ref {
                name: target,
                span: tspan,
            },
            polarity,
            weight,
            kind,
        });
    }

    fn picture_decl(&mut self) {
        let Some((id, span)) = self.expect_ident("a picture id") else {
            self.synchronize();
            return;
        };
        self.declare_id(&id, span, "picture");
        if !self.expect_tok(Tok::LBrace, "`{`") {
            self.synchronize();
            return;
        }
        if !self.keyword("parts") {
            self.error_here(ErrorKind::Syntax, "expected `parts:`");
            self.synchronize();
            return;
        }
        if !self.expect_tok(Tok::Colon, "`:` after `parts`") {
            self.synchronize();
            return;
        }
        let parts = self.id_list("part id");
        let mut features = Vec::new();
        if self.keyword("features") {
            if !self.expect_tok(Tok::Colon, "`:` after `features`") {
                self.synchronize();
                return;
            }
            features = self
                .feature_list("a picture's features clause")
                .into_iter()
                .map(|s| s.tag)
                .collect();
        }
        if !self.expect_tok(Tok::RBrace, "`}`") {
            self.synchronize();
            return;
        }
        self.picture_ids.insert(id.clone(), span);
        self.doc.pictures.push(PictureDecl {
            id,
            parts,
            features,
        });
    }

    fn situation_decl(&mut self) {
        let mut case = None;
        let case_span = self.here();
        if self.keyword("case") {
            let span = self.here();
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Ident(name)) => {
                    self.pos += 1;
                    case = Some(name);
                }
                Some(Tok::Number { raw, .. }) => {
                    self.pos += 1;
                    case = Some(raw);
                }
                _ => {
                    self.error(span, ErrorKind::Syntax, "expected a case id");
                    self.synchronize();
                    return;
                }
            }
        }
        if !self.situation_cases.insert(case.clone()) {
            let label = case.as_deref().unwrap_or("(default)");
            self.error(case_span, ErrorKind::DuplicateId, format!(
                "situation case `{label}` is already declared"
            ));
        }
        if !self.expect_tok(Tok::LBrace, "`{`") {
            self.synchronize();
            return;
        }
        let features = self.feature_list("a situation");
        if !self.expect_tok(Tok::RBrace, "`}`") {
            self.synchronize();
            return;
        }
        self.doc.situations.push(SituationDecl { case, features });
    }

    fn goal_decl(&mut self) {
        let Some(feature) = self.feature() else {
            self.synchronize();
            return;
        };
        if !self.keyword("weight") {
            self.error_here(ErrorKind::Syntax, "expected `weight`");
            self.synchronize();
            return;
        }
        let Some((weight, raw, wspan)) = self.expect_number("a goal weight") else {
            self.synchronize();
            return;
        };
        if !weight.is_finite() || weight < 0.0 {
            self.error(wspan, ErrorKind::Range, format!(
                "goal weight must be finite and non-negative, got `{raw}`"
            ));
        }
        self.doc.goals.push(GoalDecl { feature, weight });
    }

    fn query_decl(&mut self) {
        let span = self.here();
        if self.doc.query.is_some() {
            self.error(span, ErrorKind::DuplicateId, "a second query is declared");
        }
        if !self.keyword("if") {
            self.error_here(ErrorKind::Syntax, "expected `if`");
            self.synchronize();
            return;
        }
        let antecedent = self.feature_list("a query antecedent");
        if !self.keyword("then") {
            self.error_here(ErrorKind::Syntax, "expected `then`");
            self.synchronize();
            return;
        }
        let consequent = self.feature_list("a query consequent");
        self.doc.query = Some(QueryDecl {
            antecedent,
            consequent,
        });
    }

    fn attention_decl(&mut self) {
        let span = self.here();
        if self.doc.attention.is_some() {
            self.error(span, ErrorKind::DuplicateId, "a second attention mask is declared");
        }
        if !self.keyword("focus") {
            self.error_here(ErrorKind::Syntax, "expected `focus`");
            self.synchronize();
            return;
        }
        if !self.expect_tok(Tok::LBrace, "`{`") {
            self.synchronize();
            return;
        }
        let focus = self.id_list("focus target");
        if !self.expect_tok(Tok::RBrace, "`}`") {
            self.synchronize();
            return;
        }
        let mut off_gain = 0.0;
        if self.keyword("off-gain") {
            if let Some((value, raw, gspan)) = self.expect_number("an off-gain") {
                if !(0.0..=1.0).contains(&value) {
                    self.error(gspan, ErrorKind::Range, format!(
                        "off-gain must lie in [0, 1], got `{raw}`"
                    ));
                } else {
                    off_gain = value;
                }
            }
        }
        self.doc.attention = Some(AttentionDecl { focus, off_gain });
    }

    fn compose_decl(&mut self) {
        let span = self.here();
        if !self.doc.plan.is_empty() {
            self.error(span, ErrorKind::DuplicateId, "a second compose plan is declared");
        }
        let mut entries = Vec::new();
        while let Some((name, pspan)) = self.expect_ident("a plan picture id") {
            let mut part = None;
            if matches!(
                self.peek(),
                Some(Token {
                    tok: Tok::Dot,
                    ..
                })
            ) {
                self.pos += 1;
                match self.expect_ident("a part id") {
                    Some((pname, ppspan)) => {
                        part = Some(Ref {
                            name: pname,
                            span: ppspan,
                        })
                    }
                    None => break,
                }
            }
            entries.push(PlanEntryDecl {
                picture: Ref {
                    name,
                    span: pspan,
                },
                part,
            });
            if !self.keyword_comma() {
                break;
            }
        }
        if entries.is_empty() {
            self.error(span, ErrorKind::Arity, "a compose plan needs at least one entry");
        }
        self.doc.plan = entries;
    }
}

/// Post-parse reference resolution over the whole document.
fn validate(doc: &ScenarioDoc, errors: &mut Vec<ParseError>) {
    let mut push = |span: Span, kind: ErrorKind, message: String| {
        if errors.len() < MAX_DIAGNOSTICS {
            errors.push(ParseError {
                line: span.line,
                column: span.column,
                kind,
                message,
            });
        }
    };

    let groups: BTreeSet<&str> = doc.groups.iter().map(|g| g.name.as_str()).collect();
    let pictures: BTreeMap<&str, &PictureDecl> =
        doc.pictures.iter().map(|p| (p.id.as_str(), p)).collect();
    let realized: BTreeSet<&FeatureTag> =
        doc.groups.iter().flat_map(|g| g.features.iter()).collect();

    for link in &doc.links {
        for end in [&link.source, &link.target] {
            if !groups.contains(end.name.as_str()) {
                push(
                    end.span,
                    ErrorKind::UnknownReference,
                    format!("`{}` is not a declared group", end.name),
                );
            }
        }
    }

    for picture in &doc.pictures {
        for part in &picture.parts {
            if !groups.contains(part.name.as_str()) && !pictures.contains_key(part.name.as_str())
            {
                push(
                    part.span,
                    ErrorKind::UnknownReference,
                    format!("`{}` is not a declared group or picture", part.name),
                );
            }
        }
    }

    // Parts must resolve bottom-up; a cycle of picture parts never does.
    let mut resolved: BTreeSet<&str> = groups.clone();
    let mut pending: Vec<&PictureDecl> = doc.pictures.iter().collect();
    loop {
        let before = pending.len();
        pending.retain(|p| {
            let ready = p
                .parts
                .iter()
                .all(|part| resolved.contains(part.name.as_str()));
            if ready {
                resolved.insert(p.id.as_str());
            }
            !ready
        });
        if pending.is_empty() || pending.len() == before {
            break;
        }
    }
    for stuck in pending {
        if stuck
            .parts
            .iter()
            .all(|part| groups.contains(part.name.as_str()) || pictures.contains_key(part.name.as_str()))
        {
            let culprit = stuck
                .parts
                .iter()
                .find(|part| !resolved.contains(part.name.as_str()))
                .expect("an unresolved part exists");
            push(
                culprit.span,
                ErrorKind::UnknownReference,
                format!(
                    "parts of picture `{}` cannot be resolved; `{}` depends on it in a cycle",
                    stuck.id, culprit.name
                ),
            );
        }
    }

    let mut check_tag = |spanned: &SpannedTag, role: &str| {
        if !realized.contains(&spanned.tag) {
            push(
                spanned.span,
                ErrorKind::UnknownReference,
                format!("{role} `{}` has no realizing group", spanned.tag),
            );
        }
    };
    for situation in &doc.situations {
        for tag in &situation.features {
            check_tag(tag, "situation feature");
        }
    }
    for goal in &doc.goals {
        check_tag(&goal.feature, "goal feature");
    }
    if let Some(query) = &doc.query {
        for tag in query.antecedent.iter().chain(query.consequent.iter()) {
            check_tag(tag, "query feature");
        }
    }

    if let Some(attention) = &doc.attention {
        for target in &attention.focus {
            if !groups.contains(target.name.as_str())
                && !pictures.contains_key(target.name.as_str())
            {
                push(
                    target.span,
                    ErrorKind::UnknownReference,
                    format!("`{}` is not a declared group or picture", target.name),
                );
            }
        }
    }

    for entry in &doc.plan {
        match pictures.get(entry.picture.name.as_str()) {
            None => push(
                entry.picture.span,
                ErrorKind::UnknownReference,
                format!("`{}` is not a declared picture", entry.picture.name),
            ),
            Some(decl) => {
                if let Some(part) = &entry.part {
                    if !decl.parts.iter().any(|p| p.name == part.name) {
                        push(
                            part.span,
                            ErrorKind::UnknownReference,
                            format!(
                                "`{}` is not a part of picture `{}`",
                                part.name, entry.picture.name
                            ),
                        );
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(text: &str) -> ScenarioDoc {
        match parse(text) {
            Ok(doc) => doc,
            Err(errors) => panic!("expected clean parse, got {errors:#?}"),
        }
    }

    fn parse_err(text: &str) -> Vec<ParseError> {
        match parse(text) {
            Ok(_) => panic!("expected diagnostics"),
            Err(errors) => errors,
        }
    }

    const TINY: &str = r#"scenario "tiny"
group rain size 2 feature rain
group umbrella size 2 feature use-umbrella
link rain -> umbrella : 0.5
picture P { parts: rain, umbrella }
situation case wet { rain }
goal use-umbrella weight 1
query if rain then use-umbrella
"#;

    #[test]
    fn parses_a_small_document() {
        let doc = parse_ok(TINY);
        assert_eq!(doc.name, "tiny");
        assert_eq!(doc.groups.len(), 2);
        assert_eq!(doc.groups[0].size, 2);
        assert_eq!(doc.links.len(), 1);
        assert_eq!(doc.pictures[0].parts.len(), 2);
        assert_eq!(doc.situations[0].case.as_deref(), Some("wet"));
        assert!(doc.query.is_some());
    }

    #[test]
    fn numeric_case_ids_are_allowed() {
        let doc = parse_ok(
            r#"scenario "n"
group g feature f
situation case 1 { f }
situation case 2 { !f }
group h feature !f
"#,
        );
        assert_eq!(doc.situations[0].case.as_deref(), Some("1"));
        assert_eq!(doc.situations[1].case.as_deref(), Some("2"));
    }

    #[test]
    fn unknown_reference_reports_the_offending_token() {
        let errors = parse_err(
            r#"scenario "bad"
group rain feature rain
link rain -> umbrela : 0.5
"#,
        );
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ErrorKind::UnknownReference);
        assert_eq!((errors[0].line, errors[0].column), (3, 14));
        assert!(errors[0].message.contains("umbrela"));
    }

    #[test]
    fn negative_goal_weight_is_a_range_error() {
        let errors = parse_err(
            r#"scenario "bad"
group dry feature dry
goal dry weight -1
"#,
        );
        assert!(errors
            .iter()
            .any(|e| e.kind == ErrorKind::Range && e.line == 3 && e.column == 17));
    }

    #[test]
    fn duplicate_ids_are_reported_at_the_second_declaration() {
        let errors = parse_err(
            r#"scenario "bad"
group rain feature rain
group rain feature more-rain
"#,
        );
        assert_eq!(errors[0].kind, ErrorKind::DuplicateId);
        assert_eq!((errors[0].line, errors[0].column), (3, 7));
    }

    #[test]
    fn duplicate_realizer_is_reported_on_the_feature() {
        let errors = parse_err(
            r#"scenario "bad"
group a feature shiny
group b feature shiny
"#,
        );
        assert_eq!(errors[0].kind, ErrorKind::DuplicateId);
        assert_eq!((errors[0].line, errors[0].column), (3, 17));
        // Same name under the other polarity is a different feature.
        parse_ok(
            r#"scenario "ok"
group a feature shiny
group b feature !shiny
"#,
        );
    }

    #[test]
    fn empty_feature_list_is_an_arity_error() {
        let errors = parse_err(
            r#"scenario "bad"
group g feature f
situation { }
"#,
        );
        assert!(errors.iter().any(|e| e.kind == ErrorKind::Arity));
    }

    #[test]
    fn diagnostics_accumulate_instead_of_stopping() {
        let errors = parse_err(
            r#"scenario "bad"
link a -> b : 0.5
goal dry weight 1
situation { wet }
"#,
        );
        // a, b unresolved; dry unrealized; wet unrealized.
        assert_eq!(errors.len(), 4);
        assert!(errors.iter().all(|e| e.kind == ErrorKind::UnknownReference));
    }

    #[test]
    fn diagnostics_cap_at_twenty() {
        let mut text = String::from("scenario \"bad\"\n");
        for i in 0..30 {
            text.push_str(&format!("link a{i} -> b{i} : 1\n"));
        }
        let errors = parse_err(&text);
        assert_eq!(errors.len(), MAX_DIAGNOSTICS);
    }

    #[test]
    fn picture_part_cycles_are_rejected() {
        let errors = parse_err(
            r#"scenario "bad"
picture A { parts: B }
picture B { parts: A }
"#,
        );
        assert!(errors
            .iter()
            .any(|e| e.kind == ErrorKind::UnknownReference && e.message.contains("cycle")));
    }

    #[test]
    fn plan_part_must_belong_to_its_picture() {
        let errors = parse_err(
            r#"scenario "bad"
group pole feature pole-set
group tent feature tent-pitched
picture P1 { parts: tent }
compose P1.pole
"#,
        );
        assert!(errors.iter().any(|e| {
            e.kind == ErrorKind::UnknownReference && e.message.contains("not a part")
        }));
    }

    #[test]
    fn query_features_must_be_realized() {
        let errors = parse_err(
            r#"scenario "bad"
group g feature f
query if f then missing
"#,
        );
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ErrorKind::UnknownReference);
        assert_eq!(errors[0].line, 3);
    }

    #[test]
    fn recovery_resumes_at_the_next_declaration() {
        let errors = parse_err(
            r#"scenario "bad"
group : nonsense here
group ok feature fine
goal fine weight -1
"#,
        );
        // The bad group line yields a syntax error; parsing skips to the
        // next declaration keyword and still reaches the goal line.
        assert!(errors.iter().any(|e| e.kind == ErrorKind::Syntax));
        assert!(errors
            .iter()
            .any(|e| e.kind == ErrorKind::Range && e.line == 4));
    }

    #[test]
    fn compose_entries_keep_order_and_parts() {
        let doc = parse_ok(
            r#"scenario "plan"
group pole size 2 feature pole-set
group tent size 2 feature tent-pitched
group rope size 2 feature rope-tied
picture P1 { parts: tent, pole }
picture P2 { parts: rope }
compose P1.pole, P2
"#,
        );
        assert_eq!(doc.plan.len(), 2);
        assert_eq!(doc.plan[0].picture.name, "P1");
        assert_eq!(doc.plan[0].part.as_ref().unwrap().name, "pole");
        assert_eq!(doc.plan[1].picture.name, "P2");
        assert!(doc.plan[1].part.is_none());
    }
}
