//! Sentence mass distributions.
//!
//! Every scheme returns a normalized bag: strictly positive weights summing
//! to one, aligned with `doc.sentences`.
//!
//! - uniform: `1 / n`
//! - sentence length (SL): `count(i) * |i| / Σ_s count(s) * |s|`
//! - IDF: `1 + ln((N + 1) / (1 + df(i)))`, renormalized per document
//! - SLIDF: the product of the SL and IDF raw factors, renormalized

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, SentenceRef};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightingError {
    #[error("IDF table was built from an empty document collection")]
    EmptyTable,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingScheme {
    Uniform,
    #[default]
    Sl,
    Idf,
    Slidf,
}

impl WeightingScheme {
    pub const ALL: [WeightingScheme; 4] = [
        WeightingScheme::Uniform,
        WeightingScheme::Sl,
        WeightingScheme::Idf,
        WeightingScheme::Slidf,
    ];

    pub fn needs_idf(self) -> bool {
        matches!(self, WeightingScheme::Idf | WeightingScheme::Slidf)
    }
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightingScheme::Uniform => "uniform",
            WeightingScheme::Sl => "sl",
            WeightingScheme::Idf => "idf",
            WeightingScheme::Slidf => "slidf",
        })
    }
}

impl FromStr for WeightingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|w| w.to_string() == s)
            .ok_or_else(|| format!("unknown weighting {s:?} (valid: uniform, sl, idf, slidf)"))
    }
}

/// A document together with its sentence masses.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDocument<'a> {
    pub doc: &'a Document,
    weights: Vec<f64>,
}

impl<'a> WeightedDocument<'a> {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn normalized(doc: &'a Document, raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        Self {
            doc,
            weights: raw.into_iter().map(|r| r / total).collect(),
        }
    }
}

/// Identity of a sentence across documents for document-frequency counting.
/// Sentences without a `content_key` fall back to their embedding row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum SentenceKey<'a> {
    Content(&'a str),
    Row(usize),
}

impl<'a> From<&'a SentenceRef> for SentenceKey<'a> {
    fn from(s: &'a SentenceRef) -> Self {
        match &s.content_key {
            Some(k) => SentenceKey::Content(k),
            None => SentenceKey::Row(s.emb_row),
        }
    }
}

/// Document frequencies over one collection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdfTable {
    total_docs: usize,
    by_content: HashMap<String, usize>,
    by_row: HashMap<usize, usize>,
}

impl IdfTable {
    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    /// Number of documents containing the sentence; 0 if never seen.
    pub fn doc_freq(&self, s: &SentenceRef) -> usize {
        match SentenceKey::from(s) {
            SentenceKey::Content(k) => self.by_content.get(k).copied().unwrap_or(0),
            SentenceKey::Row(r) => self.by_row.get(&r).copied().unwrap_or(0),
        }
    }

    /// `1 + ln((N + 1) / (1 + df))`.
    pub fn raw_idf(&self, s: &SentenceRef) -> f64 {
        let n = self.total_docs as f64;
        1.0 + ((n + 1.0) / (1.0 + self.doc_freq(s) as f64)).ln()
    }
}

pub fn build_idf_table(docs: &[Document]) -> IdfTable {
    let mut table = IdfTable {
        total_docs: docs.len(),
        ..Default::default()
    };
    for doc in docs {
        let distinct: HashSet<SentenceKey> = doc.sentences.iter().map(SentenceKey::from).collect();
        for key in distinct {
            match key {
                SentenceKey::Content(k) => *table.by_content.entry(k.to_owned()).or_default() += 1,
                SentenceKey::Row(r) => *table.by_row.entry(r).or_default() += 1,
            }
        }
    }
    table
}

fn sl_raw(s: &SentenceRef) -> f64 {
    f64::from(s.occurrence_count) * f64::from(s.token_count)
}

pub fn weight_uniform(doc: &Document) -> WeightedDocument<'_> {
    WeightedDocument::normalized(doc, vec![1.0; doc.sentences.len()])
}

pub fn weight_sl(doc: &Document) -> WeightedDocument<'_> {
    WeightedDocument::normalized(doc, doc.sentences.iter().map(sl_raw).collect())
}

pub fn weight_idf<'a>(doc: &'a Document, table: &IdfTable) -> Result<WeightedDocument<'a>, WeightingError> {
    if table.total_docs == 0 {
        return Err(WeightingError::EmptyTable);
    }
    Ok(WeightedDocument::normalized(
        doc,
        doc.sentences.iter().map(|s| table.raw_idf(s)).collect(),
    ))
}

pub fn weight_slidf<'a>(
    doc: &'a Document,
    table: &IdfTable,
) -> Result<WeightedDocument<'a>, WeightingError> {
    if table.total_docs == 0 {
        return Err(WeightingError::EmptyTable);
    }
    Ok(WeightedDocument::normalized(
        doc,
        doc.sentences
            .iter()
            .map(|s| sl_raw(s) * table.raw_idf(s))
            .collect(),
    ))
}

/// Dispatches on `scheme`; `table` is only consulted by IDF-based schemes.
pub fn weigh<'a>(
    doc: &'a Document,
    scheme: WeightingScheme,
    table: &IdfTable,
) -> Result<WeightedDocument<'a>, WeightingError> {
    match scheme {
        WeightingScheme::Uniform => Ok(weight_uniform(doc)),
        WeightingScheme::Sl => Ok(weight_sl(doc)),
        WeightingScheme::Idf => weight_idf(doc, table),
        WeightingScheme::Slidf => weight_slidf(doc, table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(row: usize, tokens: u32, count: u32, key: Option<&str>) -> SentenceRef {
        SentenceRef {
            emb_row: row,
            token_count: tokens,
            occurrence_count: count,
            content_key: key.map(str::to_owned),
        }
    }

    fn doc(id: &str, sentences: Vec<SentenceRef>) -> Document {
        Document {
            doc_id: id.into(),
            lang: "en".into(),
            date: None,
            sentences,
        }
    }

    #[test]
    fn sl_hand_values() {
        let d = doc("a", vec![sent(0, 3, 1, None), sent(1, 7, 1, None)]);
        let w = weight_sl(&d);
        assert!((w.weights()[0] - 0.3).abs() < 1e-12);
        assert!((w.weights()[1] - 0.7).abs() < 1e-12);

        let d = doc("b", vec![sent(0, 5, 2, None), sent(1, 10, 1, None)]);
        assert_eq!(weight_sl(&d).weights(), &[0.5, 0.5]);

        let d = doc("c", vec![sent(0, 9, 1, None)]);
        assert_eq!(weight_sl(&d).weights(), &[1.0]);
    }

    #[test]
    fn idf_table_counts_documents_not_occurrences() {
        let docs = vec![
            doc("a", vec![sent(0, 1, 1, Some("x")), sent(1, 1, 1, Some("x"))]),
            doc("b", vec![sent(2, 1, 1, Some("y"))]),
            doc("c", vec![sent(3, 1, 1, Some("y"))]),
        ];
        let t = build_idf_table(&docs);
        assert_eq!(t.total_docs(), 3);
        assert_eq!(t.doc_freq(&sent(9, 1, 1, Some("x"))), 1);
        assert_eq!(t.doc_freq(&sent(9, 1, 1, Some("y"))), 2);
        assert_eq!(t.doc_freq(&sent(9, 1, 1, Some("z"))), 0);
        // row fallback
        assert_eq!(t.doc_freq(&sent(3, 1, 1, None)), 0);
    }

    #[test]
    fn idf_raw_value() {
        let docs = vec![
            doc("a", vec![sent(0, 1, 1, Some("once"))]),
            doc("b", vec![sent(1, 1, 1, None)]),
            doc("c", vec![sent(2, 1, 1, None)]),
        ];
        let t = build_idf_table(&docs);
        let raw = t.raw_idf(&sent(0, 1, 1, Some("once")));
        assert!((raw - (1.0 + 2.0f64.ln())).abs() < 1e-12);
        assert!((raw - 1.6931).abs() < 1e-4);
    }

    #[test]
    fn ubiquitous_sentence_gets_floor() {
        let docs: Vec<Document> = (0..1000)
            .map(|i| doc(&i.to_string(), vec![sent(i, 1, 1, Some("banner"))]))
            .collect();
        let t = build_idf_table(&docs);
        assert_eq!(t.raw_idf(&sent(0, 1, 1, Some("banner"))), 1.0);
    }

    #[test]
    fn idf_equal_df_gives_equal_weights() {
        let docs = vec![doc("a", vec![sent(0, 3, 1, None), sent(1, 9, 1, None)])];
        let t = build_idf_table(&docs);
        assert_eq!(weight_idf(&docs[0], &t).unwrap().weights(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_table_rejected() {
        let t = build_idf_table(&[]);
        assert_eq!(t.total_docs(), 0);
        let d = doc("a", vec![sent(0, 1, 1, None)]);
        assert_eq!(weight_idf(&d, &t), Err(WeightingError::EmptyTable));
        assert_eq!(weight_slidf(&d, &t), Err(WeightingError::EmptyTable));
        assert!(weigh(&d, WeightingScheme::Sl, &t).is_ok());
    }

    #[test]
    fn slidf_hand_values() {
        // N = 3; "rare" in 1 doc -> raw 1 + ln 2; "common" in all 3 -> raw 1.
        let target = doc(
            "t",
            vec![sent(0, 3, 1, Some("rare")), sent(1, 7, 1, Some("common"))],
        );
        let docs = vec![
            target.clone(),
            doc("u", vec![sent(2, 1, 1, Some("common"))]),
            doc("v", vec![sent(3, 1, 1, Some("common"))]),
        ];
        let t = build_idf_table(&docs);
        let w = weight_slidf(&target, &t).unwrap();
        let a = 3.0 * (1.0 + 2.0f64.ln());
        let b = 7.0;
        assert!((w.weights()[0] - a / (a + b)).abs() < 1e-12);
        assert!((w.weights()[0] - 0.4205).abs() < 1e-4);
        assert!((w.weights()[1] - 0.5795).abs() < 1e-4);
    }

    #[test]
    fn slidf_reduces_to_sl_and_idf() {
        let d = doc(
            "t",
            vec![sent(0, 3, 1, Some("p")), sent(1, 7, 2, Some("q"))],
        );
        // equal IDF: both keys occur in exactly the one document
        let t = build_idf_table(std::slice::from_ref(&d));
        let slidf = weight_slidf(&d, &t).unwrap();
        let sl = weight_sl(&d);
        for (a, b) in slidf.weights().iter().zip(sl.weights()) {
            assert!((a - b).abs() < 1e-12);
        }

        let d2 = doc("u", vec![sent(0, 4, 1, Some("p")), sent(1, 4, 1, Some("r"))]);
        let t2 = build_idf_table(&[d2.clone(), doc("v", vec![sent(5, 1, 1, Some("p"))])]);
        let slidf = weight_slidf(&d2, &t2).unwrap();
        let idf = weight_idf(&d2, &t2).unwrap();
        for (a, b) in slidf.weights().iter().zip(idf.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("slidf".parse::<WeightingScheme>().unwrap(), WeightingScheme::Slidf);
        let err = "tfidf".parse::<WeightingScheme>().unwrap_err();
        assert!(err.contains("uniform, sl, idf, slidf"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_doc() -> impl Strategy<Value = Document> {
            proptest::collection::vec((0usize..50, 1u32..200, 1u32..5, proptest::option::of(0u8..6)), 1..12)
                .prop_map(|ss| {
                    doc(
                        "p",
                        ss.into_iter()
                            .map(|(row, t, c, k)| {
                                sent(row, t, c, k.map(|k| format!("k{k}")).as_deref())
                            })
                            .collect(),
                    )
                })
        }

        proptest! {
            #[test]
            fn schemes_are_normalized_and_positive(
                docs in proptest::collection::vec(arb_doc(), 1..6),
            ) {
                let t = build_idf_table(&docs);
                for d in &docs {
                    for scheme in WeightingScheme::ALL {
                        let w = weigh(d, scheme, &t).unwrap();
                        let total: f64 = w.weights().iter().sum();
                        prop_assert!((total - 1.0).abs() <= 1e-9);
                        prop_assert!(w.weights().iter().all(|&x| x > 0.0));
                        prop_assert_eq!(w.len(), d.sentences.len());
                    }
                }
            }

            #[test]
            fn sl_invariant_under_token_scaling(d in arb_doc(), k in 2u32..9) {
                let mut scaled = d.clone();
                scaled.sentences.iter_mut().for_each(|s| s.token_count *= k);
                let a = weight_sl(&d);
                let b = weight_sl(&scaled);
                for (x, y) in a.weights().iter().zip(b.weights()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn idf_non_increasing_in_df(n in 1usize..500, df1 in 0usize..500, df2 in 0usize..500) {
                let (lo, hi) = (df1.min(df2).min(n), df1.max(df2).min(n));
                let raw = |df: usize| 1.0 + ((n as f64 + 1.0) / (1.0 + df as f64)).ln();
                let mut t = IdfTable { total_docs: n, ..Default::default() };
                t.by_content.insert("lo".into(), lo);
                t.by_content.insert("hi".into(), hi);
                let rl = t.raw_idf(&sent(0, 1, 1, Some("lo")));
                let rh = t.raw_idf(&sent(0, 1, 1, Some("hi")));
                prop_assert!(rh <= rl);
                prop_assert_eq!(rl, raw(lo));
            }
        }
    }
}
