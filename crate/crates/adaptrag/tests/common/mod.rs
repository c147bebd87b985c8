//! Synthetic fixtures shared by the integration tests: a marker-word training
//! corpus, a small knowledge base, a scripted model, and a 20-record batch
//! split evenly between high and low information completeness.

#![allow(dead_code)]

use adaptrag::core::{KnowledgeDoc, MockBackend, MockRule, TrainingExample, UnitLabel};
use adaptrag::EmrRecord;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CRITICAL: [&str; 5] = ["hemoptysis", "jaundice", "melena", "hematuria", "wheeze"];
pub const CONTEXT: [&str; 4] = ["smoker", "traveled", "farmer", "alcohol"];
pub const FILLER: [&str; 12] =
    ["came", "with", "family", "today", "feels", "tired", "morning", "arrived", "early", "home", "reports", "sleeping"];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// A sentence of 3-5 filler words, with `marker` inserted when given.
pub fn sentence(rng: &mut ChaCha8Rng, marker: Option<&str>) -> String {
    let n = rng.gen_range(3..=5);
    let mut words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect();
    if let Some(m) = marker {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, m);
    }
    capitalize(&words.join(" ")) + "."
}

pub fn labeled_sentence(rng: &mut ChaCha8Rng, label: UnitLabel) -> String {
    let marker = match label {
        UnitLabel::A => Some(*CRITICAL.choose(rng).unwrap()),
        UnitLabel::B => Some(*CONTEXT.choose(rng).unwrap()),
        UnitLabel::C => None,
    };
    sentence(rng, marker)
}

/// Balanced, linearly separable training corpus.
pub fn training_corpus(n: usize, seed: u64) -> Vec<TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = UnitLabel::ALL[i % 3];
            TrainingExample { text: labeled_sentence(&mut rng, label), label }
        })
        .collect()
}

/// Balanced corpus with a single marker token per informative class.
pub fn single_marker_corpus(n: usize, seed: u64) -> Vec<TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = UnitLabel::ALL[i % 3];
            let marker = match label {
                UnitLabel::A => Some(CRITICAL[0]),
                UnitLabel::B => Some(CONTEXT[0]),
                UnitLabel::C => None,
            };
            TrainingExample { text: sentence(&mut rng, marker), label }
        })
        .collect()
}

pub fn record_text(rng: &mut ChaCha8Rng, labels: &[UnitLabel]) -> String {
    labels.iter().map(|&l| labeled_sentence(rng, l)).collect::<Vec<_>>().join(" ")
}

/// Intended unit labels for each record of [`mixed_batch`].
pub fn mixed_batch_labels() -> Vec<(String, Vec<UnitLabel>)> {
    use UnitLabel::*;
    let mut out = Vec::new();
    for i in 0..10 {
        out.push((format!("high-{i:02}"), vec![A, A, A]));
    }
    for i in 0..5 {
        out.push((format!("low-mid-{i:02}"), vec![A, C, C]));
    }
    for i in 0..5 {
        out.push((format!("low-bare-{i:02}"), vec![C, C, C]));
    }
    out
}

/// 10 all-critical records and 10 sparse ones.
pub fn mixed_batch(seed: u64) -> Vec<EmrRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mixed_batch_labels()
        .into_iter()
        .map(|(id, labels)| EmrRecord::new(id, record_text(&mut rng, &labels)).with_reference("pulmonary tuberculosis"))
        .collect()
}

/// Tuberculosis is long enough to be split into several chunks, each
/// mentioning hemoptysis; bronchiectasis is one short, hemoptysis-dense chunk.
pub fn kb_docs() -> Vec<KnowledgeDoc> {
    vec![
        KnowledgeDoc::new(
            "tb",
            "Pulmonary tuberculosis",
            "Pulmonary tuberculosis is a chronic mycobacterial infection of the lung that typically presents with prolonged cough, \
             low grade fever, night sweats, weight loss and hemoptysis of variable volume. \
             Cavitary disease on imaging is associated with larger hemoptysis and higher bacillary load, and sputum smear microscopy \
             with culture remains the cornerstone of confirming the diagnosis in endemic settings. \
             Recurrent hemoptysis after completed treatment should prompt evaluation for residual cavities, aspergilloma or \
             bronchiectasis, and contacts of an infectious patient should be screened for latent infection promptly.",
        ),
        KnowledgeDoc::new("bronchiectasis", "Bronchiectasis", "Hemoptysis, hemoptysis again: recurrent hemoptysis."),
        KnowledgeDoc::new("hepatitis", "Viral hepatitis", "Jaundice with dark urine and raised transaminases. Alcohol worsens liver injury."),
        KnowledgeDoc::new("ulcer", "Peptic ulcer bleeding", "Melena and epigastric pain. Alcohol and anti-inflammatory drugs are risk factors."),
        KnowledgeDoc::new("stones", "Urolithiasis", "Hematuria with colicky flank pain radiating to the groin."),
        KnowledgeDoc::new("asthma", "Asthma", "Episodic wheeze and chest tightness. The smoker is at higher risk of poor control."),
        KnowledgeDoc::new("malaria", "Malaria", "Fever after a patient traveled to an endemic region; the farmer working outdoors is exposed."),
        KnowledgeDoc::new(
            "fatigue",
            "Chronic fatigue syndrome",
            "Patients feel tired every morning and report sleeping poorly; family members notice early exhaustion at home.",
        ),
    ]
}

/// Grounded calls answer tuberculosis, the fatigue document is always
/// excluded, every other document is supported, direct calls answer influenza.
pub fn mock_rules() -> Vec<MockRule> {
    vec![
        MockRule::new("Reference documents:", "Diagnosis: pulmonary tuberculosis"),
        MockRule::new("family members notice early exhaustion", "EXCLUDE: no objective findings"),
        MockRule::new("Reference document:", "SUPPORT: consistent findings"),
    ]
}

pub const DIRECT_ANSWER: &str = "Diagnosis: influenza";

pub fn mock_backend() -> MockBackend {
    MockBackend::new(mock_rules()).with_default(DIRECT_ANSWER)
}
