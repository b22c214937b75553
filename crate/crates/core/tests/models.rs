use npiscan::cnn::{Cnn, CnnConfig};
use npiscan::datagen::{generate_background_word, generate_entity, WordDistribution};
use npiscan::eval::score_documents;
use npiscan::optim::OptimizerConfig;
use npiscan::rng::stream_rng;
use npiscan::{EntityLabel, LabeledDocument, SpanAnnotation};

/// Lines of background words with one `entity` value in the middle.
fn toy_corpus(entity: EntityLabel, n: usize, seed: u64) -> Vec<LabeledDocument> {
    let dist = WordDistribution::bundled();
    let mut rng = stream_rng(seed, "toy-corpus", 0);
    (0..n)
        .map(|i| {
            let mut text = String::new();
            for _ in 0..3 {
                text.push_str(&generate_background_word(&dist, &mut rng));
                text.push(' ');
            }
            let v = generate_entity(entity, None, &mut rng).unwrap();
            let start = text.len() + v.start;
            let end = text.len() + v.end;
            text.push_str(&v.text);
            for _ in 0..2 {
                text.push(' ');
                text.push_str(&generate_background_word(&dist, &mut rng));
            }
            LabeledDocument::from_spans(format!("toy{i}"), text, vec![SpanAnnotation::new(start, end, entity)]).unwrap()
        })
        .collect()
}

fn toy_config() -> CnnConfig {
    CnnConfig {
        epochs: 10,
        max_length: 64,
        batch_size: 4,
        optimizer: OptimizerConfig::Adam { lr: 3e-3, beta1: 0.9, beta2: 0.999, eps: 1e-7 },
        ..CnnConfig::default()
    }
}

#[test]
fn cnn_learns_toy_corpus() {
    let train = toy_corpus(EntityLabel::Uuid, 50, 1);
    let heldout = toy_corpus(EntityLabel::Uuid, 20, 2);
    let (model, report) = Cnn::<f32>::train(&train, Some(&heldout), toy_config(), 11).unwrap();
    assert_eq!(report.losses.len(), 10);
    assert_eq!(report.heldout_micro_f1.len(), 10);
    let pred = model.predict(&heldout).unwrap();
    let f1 = score_documents(&heldout, &pred, true).unwrap().micro.f1;
    assert!(f1 >= 0.99, "held-out micro-F1 {f1}, per epoch {:?}", report.heldout_micro_f1);
}

#[test]
fn cnn_tags_ssn_line_after_toy_training() {
    let train = toy_corpus(EntityLabel::Ssn, 50, 4);
    let (model, _) = Cnn::<f32>::train(&train, None, toy_config(), 12).unwrap();
    let line = model.tag_line("ssn 123-45-6789 on file");
    assert!(line[4..15].iter().all(|l| *l == EntityLabel::Ssn), "{line:?}");
}

#[test]
fn cnn_training_is_deterministic() {
    let train = toy_corpus(EntityLabel::Uuid, 10, 3);
    let config = CnnConfig { epochs: 2, ..toy_config() };
    let (a, ra) = Cnn::<f32>::train(&train, None, config.clone(), 5).unwrap();
    let (b, rb) = Cnn::<f32>::train(&train, None, config, 5).unwrap();
    assert_eq!(ra.losses, rb.losses);
    assert_eq!(a, b);
}

trait TagLine {
    fn tag_line(&self, text: &str) -> Vec<EntityLabel>;
}

impl TagLine for Cnn<f32> {
    fn tag_line(&self, text: &str) -> Vec<EntityLabel> {
        self.predict(&[LabeledDocument::unlabeled("line", text)]).unwrap().pop().unwrap()
    }
}

