//! Orchestrator traces for each routing branch, using a keyword classifier
//! and a scripted model.

use adaptrag_core::{
    diagnose, ChunkingMode, ClassifyError, CountingModel, Engine, KnowledgeDoc, KnowledgeIndex, LabeledUnit, LanguageModel, LlmError,
    LlmRequest, LlmResponse, MockBackend, MockRule, OutcomeStatus, PipelineConfig, Policy, RoutingDecision, Stage, Templates, TextUnit,
    Toggles, UnitClassifier,
};

/// "critical" words -> A, "context" words -> B, else C.
struct Keywords;

impl UnitClassifier for Keywords {
    fn classify(&self, units: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError> {
        Ok(units
            .iter()
            .map(|u| {
                let t = u.text.to_lowercase();
                let scores = if ["wheeze", "headache", "epigastric"].iter().any(|w| t.contains(w)) {
                    [0.9, 0.05, 0.05]
                } else if t.contains("smoker") {
                    [0.05, 0.9, 0.05]
                } else {
                    [0.05, 0.05, 0.9]
                };
                LabeledUnit::from_scores(u.clone(), scores)
            })
            .collect())
    }
}

fn kb(mode: ChunkingMode) -> KnowledgeIndex {
    let docs = [
        KnowledgeDoc::new("asthma", "Asthma", "Recurrent wheeze and chest tightness. Smoker status worsens control. Night cough is common."),
        KnowledgeDoc::new("migraine", "Migraine", "Unilateral throbbing headache. Photophobia and nausea."),
        KnowledgeDoc::new("gastritis", "Gastritis", "Epigastric burning after meals. Nausea may occur."),
    ];
    KnowledgeIndex::build(docs, mode, Default::default(), Default::default()).unwrap()
}

fn gateway() -> CountingModel<MockBackend> {
    CountingModel::new(
        MockBackend::new(vec![
            MockRule::new("Reference documents:", "Diagnosis: asthma"),
            MockRule::new("Photophobia", "EXCLUDE: no headache reported"),
            MockRule::new("Reference document:", "SUPPORT"),
        ])
        .with_default("Diagnosis: influenza"),
    )
}

const HIGH: &str = "Audible wheeze on exam. Wheeze worse at night.";
const MID: &str = "Wheeze since spring. Came with daughter. Likes gardening.";
const LOW: &str = "Came with daughter. Likes gardening. Tired lately.";

fn sentences() -> ChunkingMode {
    ChunkingMode::Sentences { max_chunk_chars: 256 }
}

#[test]
fn high_completeness_goes_direct() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = engine.diagnose("h1", HIGH).unwrap();
    assert_eq!(out.route, RoutingDecision::Direct);
    assert_eq!(out.i_norm, 1.0);
    assert_eq!((out.call_counts.llm_calls, out.call_counts.retriever_queries), (1, 0));
    assert!(out.retrieved_docs.is_empty() && out.kept_docs.is_empty() && !out.warning);
    assert_eq!(out.final_diagnosis, "Diagnosis: influenza");
    assert_eq!(gw.calls(), 1);
}

#[test]
fn mid_completeness_retrieves_and_filters() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = engine.diagnose("m1", MID).unwrap();
    assert_eq!(out.route, RoutingDecision::Retrieve);
    assert!((out.i_norm - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(out.queries_used, [0]);
    assert_eq!(out.retrieved_docs, ["asthma"]);
    assert_eq!(out.call_counts.llm_calls, out.retrieved_docs.len() + 1);
    assert_eq!(out.call_counts.retriever_queries, 1);
    assert_eq!(out.final_diagnosis, "Diagnosis: asthma");
    assert_eq!(gw.calls(), out.call_counts.llm_calls);
}

#[test]
fn all_c_warns_and_falls_back_to_every_unit() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = engine.diagnose("l1", LOW).unwrap();
    assert_eq!(out.route, RoutingDecision::RetrieveWithWarning);
    assert!(out.warning && out.fallback_flags.query_fallback);
    assert_eq!(out.queries_used, [0, 1, 2]);
    assert_eq!(out.call_counts.retriever_queries, 3);
}

#[test]
fn filter_excludes_and_keeps_order() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = diagnose(&engine, "x", "Wheeze and headache. Epigastric burning and nausea.", Policy::Adaptive).unwrap();
    assert_eq!(out.route, RoutingDecision::Direct);
    let out = diagnose(&engine, "x", "Wheeze and headache. Epigastric burning and nausea.", Policy::Always).unwrap();
    assert_eq!(out.retrieved_docs.len(), 3);
    assert!(!out.kept_docs.contains(&"migraine".to_string()));
    let kept_in_order: Vec<_> = out.retrieved_docs.iter().filter(|d| out.kept_docs.contains(d)).cloned().collect();
    assert_eq!(kept_in_order, out.kept_docs);
    assert_eq!(out.verdicts.len(), 3);
    assert_eq!(out.call_counts.llm_calls, 4);
}

#[test]
fn empty_evidence_is_flagged() {
    let gw = MockBackend::new(vec![MockRule::new("Reference documents:", "Diagnosis: unknown")]).with_default("EXCLUDE");
    let (config, index, templates) = (PipelineConfig::default(), kb(sentences()), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = engine.diagnose("m1", MID).unwrap();
    assert!(out.kept_docs.is_empty() && out.fallback_flags.empty_evidence);
    assert!(out.is_completed());
}

#[test]
fn never_policy_skips_retrieval() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = diagnose(&engine, "l1", LOW, Policy::Never).unwrap();
    assert_eq!(out.route, RoutingDecision::Direct);
    assert!(!out.warning);
    assert_eq!(out.call_counts.retriever_queries, 0);
}

struct Broken;

impl LanguageModel for Broken {
    fn complete(&self, _: &LlmRequest) -> Result<LlmResponse, LlmError> {
        Err(LlmError::HttpStatus(503))
    }
}

#[test]
fn final_call_failure_is_a_failed_outcome() {
    let (config, index, templates) = (PipelineConfig::default(), kb(sentences()), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &Broken, &templates).unwrap();
    let out = engine.diagnose("h1", HIGH).unwrap();
    assert!(matches!(out.status, OutcomeStatus::Failed { stage: Stage::Generate, .. }));
    // filter failures fail open, then the final call fails
    let out = engine.diagnose("m1", MID).unwrap();
    assert_eq!(out.kept_docs, out.retrieved_docs);
    assert_eq!(out.fallback_flags.unparseable_verdicts, out.retrieved_docs.len());
    assert!(!out.is_completed());
}

struct Failing;

impl UnitClassifier for Failing {
    fn classify(&self, _: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError> {
        Err(ClassifyError::Backend("down".into()))
    }
}

#[test]
fn errors_carry_their_stage() {
    let (config, index, gw, templates) = (PipelineConfig::default(), kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Failing, &index, &gw, &templates).unwrap();
    assert_eq!(engine.diagnose("r", HIGH).unwrap_err().stage, Stage::Classify);
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    assert_eq!(engine.diagnose("r", "   ").unwrap_err().stage, Stage::Segment);
}

#[test]
fn chunking_toggle_must_match_index() {
    let (index, gw, templates) = (kb(ChunkingMode::WholeDocument), gateway(), Templates::default());
    let config = PipelineConfig::default();
    assert!(Engine::new(&config, &Keywords, &index, &gw, &templates).is_err());
    let config = PipelineConfig { toggles: Toggles { chunking_enabled: false, ..Toggles::default() }, ..Default::default() };
    assert!(Engine::new(&config, &Keywords, &index, &gw, &templates).is_ok());
}

#[test]
fn disabled_diff_keeps_everything_without_verdict_calls() {
    let config = PipelineConfig { toggles: Toggles { diff_filter_enabled: false, ..Toggles::default() }, ..Default::default() };
    let (index, gw, templates) = (kb(sentences()), gateway(), Templates::default());
    let engine = Engine::new(&config, &Keywords, &index, &gw, &templates).unwrap();
    let out = diagnose(&engine, "x", "Wheeze and headache. Epigastric burning and nausea.", Policy::Always).unwrap();
    assert_eq!(out.kept_docs, out.retrieved_docs);
    assert!(out.verdicts.is_empty());
    assert_eq!(out.call_counts.llm_calls, 1);
}
