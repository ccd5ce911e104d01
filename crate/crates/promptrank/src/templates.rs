//! Encoder/decoder prompt templates.
//!
//! The encoder template carries a `[D]` placeholder for the document,
//! the decoder template ends in `[C]` for the candidate. Placing the
//! candidate last means one shared decoder prefix per document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_TEMPLATE_ID: &str = "len5-default";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub encoder_template: String,
    pub decoder_template: String,
    pub decoder_prefix_len_words: usize,
}

impl PromptTemplate {
    pub fn new(id: &str, encoder: &str, decoder: &str) -> Result<Self> {
        let invalid = |message: &str| Error::Template {
            id: id.to_string(),
            message: message.to_string(),
        };
        if encoder.matches("[D]").count() != 1 {
            return Err(invalid("encoder template must contain exactly one [D]"));
        }
        if decoder.matches("[C]").count() != 1 {
            return Err(invalid("decoder template must contain exactly one [C]"));
        }
        if !decoder.trim_end().ends_with("[C]") {
            return Err(invalid("[C] must be the final content of the decoder template"));
        }
        let prefix = decoder.replace("[C]", "");
        Ok(PromptTemplate {
            id: id.to_string(),
            encoder_template: encoder.to_string(),
            decoder_template: decoder.to_string(),
            decoder_prefix_len_words: prefix.split_whitespace().count(),
        })
    }

    /// Fill `[D]` with the document text, verbatim, no escaping.
    pub fn render_encoder(&self, doc_text: &str) -> String {
        self.encoder_template.replace("[D]", doc_text)
    }

    /// Decoder template with `[C]` removed; identical for every
    /// candidate of a document. Whitespace before `[C]` is preserved
    /// exactly as written.
    pub fn render_decoder_prefix(&self) -> String {
        self.decoder_template.replace("[C]", "")
    }
}

/// Every built-in template: the length-study groups, the noun-word
/// variants, and the keyword phrasing. `len5-default` is the
/// recommended pair (`Book:"[D]"` / `This book mainly talks about [C]`).
pub fn builtin_registry() -> Vec<PromptTemplate> {
    let book = "Book:\"[D]\"";
    let entries: Vec<(&str, &str, &str)> = vec![
        ("len0-1", book, "[C]"),
        ("len2-1", book, "Book about [C]"),
        ("len2-2", book, "It is [C]"),
        ("len2-3", book, "Keywords are [C]"),
        ("len2-4", book, "Talk about [C]"),
        ("len5-1", book, "This book are mainly about [C]"),
        ("len5-2", book, "This book mainly focuses on [C]"),
        (DEFAULT_TEMPLATE_ID, book, "This book mainly talks about [C]"),
        ("len5-4", book, "This book pays attention to [C]"),
        ("len5-keywords", book, "Keywords of this book are [C]"),
        ("len10-1", book, "All in all, the core of this book is [C]"),
        ("len10-2", book, "Read this book and tell me that it is about [C]"),
        ("len10-3", book, "Take a look at the full book, it involves [C]"),
        (
            "len10-4",
            book,
            "Think carefully, this book has somthing to do with [C]",
        ),
        (
            "len20-1",
            book,
            "Please read this book carefully from beginning to end and just give your conclusion, this book mainly focuses on [C]",
        ),
        (
            "len20-2",
            book,
            "The book describes something so interesting, please read it carefully and tell us that this book is about [C]",
        ),
        (
            "len20-3",
            book,
            "The book is interesting, please read it carefully and summarize its main points with a few keywords like [C]",
        ),
        (
            "len20-4",
            book,
            "Through careful reading and adequate analysis, we have come to the conclusion that this book mainly talks about [C]",
        ),
        (
            "noun-passage",
            "Passage:\"[D]\"",
            "This passage mainly talks about [C]",
        ),
        ("noun-news", "News:\"[D]\"", "This news mainly talks about [C]"),
        ("noun-text", "Text:\"[D]\"", "This text mainly talks about [C]"),
        (
            "noun-paper",
            "Paper:\"[D]\"",
            "This paper mainly talks about [C]",
        ),
    ];
    entries
        .into_iter()
        .map(|(id, enc, dec)| PromptTemplate::new(id, enc, dec).expect("builtin template valid"))
        .collect()
}

/// Look up a template by id; "default" and "noun-book" alias the
/// recommended pair.
pub fn lookup(id: &str) -> Result<PromptTemplate> {
    let id = match id {
        "default" | "noun-book" | "len5-3" => DEFAULT_TEMPLATE_ID,
        other => other,
    };
    builtin_registry()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
}

#[derive(Debug, Deserialize)]
struct UserTemplate {
    id: String,
    encoder: String,
    decoder: String,
}

/// Load user templates from a JSON array of
/// `{"id":..., "encoder":..., "decoder":...}` entries.
pub fn load_templates(path: &Path) -> Result<Vec<PromptTemplate>> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<UserTemplate> = serde_json::from_str(&data).map_err(|e| Error::Template {
        id: path.display().to_string(),
        message: e.to_string(),
    })?;
    raw.iter()
        .map(|t| PromptTemplate::new(&t.id, &t.encoder, &t.decoder))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_render_is_verbatim() {
        let t = lookup("default").unwrap();
        assert_eq!(t.render_encoder("AI."), "Book:\"AI.\"");
        let ident = PromptTemplate::new("ident", "[D]", "[C]").unwrap();
        assert_eq!(ident.render_encoder("x"), "x");
        assert_eq!(
            t.render_encoder("he said \"hi\""),
            "Book:\"he said \"hi\"\""
        );
    }

    #[test]
    fn decoder_prefix_drops_placeholder() {
        let t = lookup("default").unwrap();
        assert_eq!(t.render_decoder_prefix(), "This book mainly talks about ");
        assert_eq!(lookup("len0-1").unwrap().render_decoder_prefix(), "");
        assert_eq!(
            lookup("len5-keywords").unwrap().render_decoder_prefix(),
            "Keywords of this book are "
        );
    }

    #[test]
    fn registry_contents() {
        let reg = builtin_registry();
        let t = lookup("default").unwrap();
        assert_eq!(t.encoder_template, "Book:\"[D]\"");
        assert_eq!(t.decoder_template, "This book mainly talks about [C]");
        assert_eq!(t.decoder_prefix_len_words, 5);
        // the length-20 study group
        assert_eq!(reg.iter().filter(|t| t.id.starts_with("len20-")).count(), 4);
        assert_eq!(reg.iter().filter(|t| t.id.starts_with("len10-")).count(), 4);
        assert_eq!(reg.iter().filter(|t| t.id.starts_with("len2-")).count(), 4);
        for id in ["noun-passage", "noun-news", "noun-text", "noun-paper"] {
            assert!(reg.iter().any(|t| t.id == id), "missing {id}");
        }
        // every entry passes the constructor invariants
        for t in &reg {
            PromptTemplate::new(&t.id, &t.encoder_template, &t.decoder_template).unwrap();
        }
    }

    #[test]
    fn prefix_plus_candidate_reconstructs_decoder_text() {
        for t in builtin_registry() {
            let full = t.decoder_template.replace("[C]", "neural networks");
            assert_eq!(
                format!("{}neural networks", t.render_decoder_prefix()),
                full
            );
        }
    }

    #[test]
    fn invalid_templates_rejected() {
        assert!(PromptTemplate::new("x", "no placeholder", "[C]").is_err());
        assert!(PromptTemplate::new("x", "[D][D]", "[C]").is_err());
        assert!(PromptTemplate::new("x", "[D]", "about [C] more").is_err());
        assert!(PromptTemplate::new("x", "[D]", "no candidate").is_err());
    }

    #[test]
    fn user_templates_validated_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("t.json");
        std::fs::write(
            &good,
            r#"[{"id":"mine","encoder":"Doc: [D]","decoder":"It covers [C]"}]"#,
        )
        .unwrap();
        let ts = load_templates(&good).unwrap();
        assert_eq!(ts[0].decoder_prefix_len_words, 2);

        let bad = dir.path().join("bad.json");
        std::fs::write(
            &bad,
            r#"[{"id":"mine","encoder":"Doc: [D]","decoder":"[C] comes first"}]"#,
        )
        .unwrap();
        assert!(load_templates(&bad).is_err());
    }

    #[test]
    fn unknown_id_is_an_error() {
        assert!(matches!(
            lookup("len99-1"),
            Err(crate::Error::UnknownTemplate(_))
        ));
    }
}
