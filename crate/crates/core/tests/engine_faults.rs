use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use iotlog_forge::abstraction::{
    classify_batch, classify_change, BatchOptions, ClassifyError, Completer, CompletionError, FailurePolicy,
    OfflineModel, PromptBackend, PromptTemplate, RuleBackend,
};
use iotlog_forge::reference;
use iotlog_forge::state::{track_changes, StateChange, StateSnapshot};
use iotlog_forge::synth::{generate_scenario, RoutineSpec};
use iotlog_forge::Source;

/// Offline model that answers garbage on the listed call numbers.
struct Flaky {
    inner: OfflineModel,
    garble: Vec<u64>,
    calls: AtomicU64,
}

impl Completer for Flaky {
    fn backend_id(&self) -> &str {
        "flaky"
    }

    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.garble.contains(&n) {
            return Ok("sorry, the sensors are confusing today".into());
        }
        self.inner.complete(prompt)
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

fn changes(n: usize) -> Vec<StateChange> {
    let b = generate_scenario(3, 5, &RoutineSpec::default()).unwrap();
    let registry = reference::ambient_registry();
    let initial = StateSnapshot::zeros(registry.len(), b.ambient[0].timestamp);
    let mut c = track_changes(&b.ambient, &registry, &initial).unwrap();
    c.truncate(n);
    c
}

fn backend(garble: Vec<u64>) -> (PromptBackend, Arc<Flaky>) {
    let registry = reference::ambient_registry();
    let rules = reference::ambient_rules();
    let flaky = Arc::new(Flaky {
        inner: OfflineModel::new(reference::taxonomies()).with_classifier(registry.clone(), rules.clone()),
        garble,
        calls: AtomicU64::new(0),
    });
    let template = PromptTemplate::standard(&registry, &rules).unwrap();
    let b = PromptBackend::new(flaky.clone(), template, reference::taxonomy(Source::Ambient)).unwrap();
    (b, flaky)
}

fn expected(changes: &[StateChange]) -> Vec<String> {
    let rules = RuleBackend::new(reference::ambient_rules());
    changes
        .iter()
        .map(|c| {
            classify_change(c, &rules, FailurePolicy::Strict)
                .unwrap()
                .label
                .to_string()
        })
        .collect()
}

fn opts(batch_size: usize, policy: FailurePolicy, per_item_fallback: bool) -> BatchOptions {
    BatchOptions {
        batch_size,
        parallelism: 1,
        policy,
        per_item_fallback,
    }
}

#[test]
fn ten_changes_in_batches_of_four_take_three_requests() {
    let c = changes(10);
    let (b, model) = backend(vec![]);
    let out = classify_batch(&c, &b, &opts(4, FailurePolicy::Strict, true)).unwrap();
    assert_eq!(model.calls(), 3);
    assert_eq!(out.batch_fallbacks, 0);
    let got: Vec<String> = out.verdicts.iter().map(|v| v.label.to_string()).collect();
    assert_eq!(got, expected(&c));
}

#[test]
fn unparseable_batch_is_reasked_item_by_item() {
    let c = changes(10);
    let (b, model) = backend(vec![1]);
    let out = classify_batch(&c, &b, &opts(4, FailurePolicy::FallbackNone, true)).unwrap();
    assert_eq!(out.batch_fallbacks, 1);
    assert_eq!(model.calls(), 3 + 4);
    assert_eq!(out.parse_failures(), 0);
    let got: Vec<String> = out.verdicts.iter().map(|v| v.label.to_string()).collect();
    assert_eq!(got, expected(&c));
}

#[test]
fn without_item_fallback_the_batch_becomes_none() {
    let c = changes(10);
    let (b, _) = backend(vec![0]);
    let out = classify_batch(&c, &b, &opts(4, FailurePolicy::FallbackNone, false)).unwrap();
    for (i, v) in out.verdicts.iter().enumerate() {
        assert_eq!(v.diagnostic.is_some(), i < 4, "item {i}");
        if i < 4 {
            assert!(v.label.is_none());
            assert!(v.raw_response.contains("confusing"));
        }
    }
    assert_eq!(
        out.verdicts[4..]
            .iter()
            .map(|v| v.label.to_string())
            .collect::<Vec<_>>(),
        expected(&c)[4..]
    );
}

#[test]
fn strict_policy_surfaces_the_parse_error() {
    let c = changes(6);
    let (b, _) = backend(vec![0]);
    let err = classify_batch(&c, &b, &opts(3, FailurePolicy::Strict, false)).unwrap_err();
    assert!(matches!(err, ClassifyError::Parse(_)), "{err:?}");
    let (b, _) = backend(vec![2]);
    let err = classify_batch(&c, &b, &opts(1, FailurePolicy::Strict, true)).unwrap_err();
    assert!(matches!(err, ClassifyError::Parse(_)), "{err:?}");
}

#[test]
fn parallel_batches_keep_input_order() {
    let c = changes(40);
    let (b, model) = backend(vec![]);
    let o = BatchOptions {
        parallelism: 4,
        ..opts(3, FailurePolicy::Strict, true)
    };
    let out = classify_batch(&c, &b, &o).unwrap();
    assert_eq!(model.calls(), 14);
    let got: Vec<String> = out.verdicts.iter().map(|v| v.label.to_string()).collect();
    assert_eq!(got, expected(&c));
}
