use dermcascade::{
    anonymizer::{anonymize_document, LexiconSet},
    corpus::{
        filter_by_min_frequency, read_corpus, stratified_split, write_corpus_to, ClinicalRecord, CorpusFormat,
        LabeledCorpus, SplitSpec,
    },
    learner::softmax,
    metrics::evaluate_single_label,
};
use proptest::prelude::*;

/// Corpora of up to 6 labels with 2..20 records each.
fn corpus() -> impl Strategy<Value = LabeledCorpus> {
    prop::collection::vec(2usize..20, 1..6).prop_map(|sizes| {
        let mut recs = Vec::new();
        for (l, n) in sizes.iter().enumerate() {
            for i in 0..*n {
                recs.push(ClinicalRecord::new(
                    format!("{l}-{i}"),
                    format!("texto \"{l}\", nota {i}"),
                    &format!("etiqueta {l}"),
                ));
            }
        }
        LabeledCorpus::new(recs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_idempotent_and_antitone(c in corpus(), m in 1usize..25) {
        match filter_by_min_frequency(&c, m) {
            Ok(once) => {
                prop_assert_eq!(filter_by_min_frequency(&once, m).unwrap(), once.clone());
                if let Ok(higher) = filter_by_min_frequency(&c, m + 1) {
                    prop_assert!(higher.num_labels() <= once.num_labels());
                }
            }
            Err(_) => prop_assert!(filter_by_min_frequency(&c, m + 1).is_err()),
        }
    }

    #[test]
    fn split_respects_fraction_per_label(c in corpus(), f in 0.2f64..0.9, seed in any::<u64>()) {
        let (train, test) = stratified_split(&c, &SplitSpec { train_fraction: f, seed, stratified: true }).unwrap();
        prop_assert_eq!(train.len() + test.len(), c.len());
        for (label, &n) in c.label_counts() {
            let t = train.label_counts().get(label).copied().unwrap_or(0);
            prop_assert!((t as f64 / n as f64 - f).abs() <= 1.0 / n as f64 + 1e-12, "{label}: {t}/{n} vs {f}");
        }
        let again = stratified_split(&c, &SplitSpec { train_fraction: f, seed, stratified: true }).unwrap();
        prop_assert_eq!(again.0, train);
    }

    #[test]
    fn corpus_round_trips(c in corpus()) {
        for format in [CorpusFormat::Jsonl, CorpusFormat::Csv] {
            let mut buf = Vec::new();
            write_corpus_to(&c, &mut buf, format).unwrap();
            prop_assert_eq!(read_corpus(buf.as_slice(), format).unwrap(), c.clone());
        }
    }

    #[test]
    fn anonymizer_strips_digits_and_is_idempotent(text in "[a-zA-ZáéñÁ0-9 ,./:\\-]{0,120}", extra in prop::sample::select(vec!["María", "Sevilla", "Dr. García", "seco", "12/03/2021", "²³"])) {
        let lex = LexiconSet::builtin();
        let input = format!("{text} {extra}");
        let out = anonymize_document(&input, &lex);
        prop_assert!(!out.masked_text.chars().any(|c| c.is_ascii_digit()));
        prop_assert_eq!(anonymize_document(&out.masked_text, &lex).masked_text, out.masked_text.clone());
        prop_assert_eq!(out.mask_count, out.masked_text.matches("[Entidad]").count() - input.matches("[Entidad]").count());
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-500.0f64..500.0, 1..12)) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn metric_identities(rows in prop::collection::vec((0usize..5, Just((0..5).collect::<Vec<usize>>()).prop_shuffle()), 1..60)) {
        let name = |i: usize| format!("c{i}");
        let truth: Vec<String> = rows.iter().map(|(t, _)| name(*t)).collect();
        let ranked: Vec<Vec<String>> = rows.iter().map(|(_, r)| r.iter().map(|&i| name(i)).collect()).collect();
        let mut prev = 0.0;
        for k in 1..=5 {
            let rep = evaluate_single_label(&truth, &ranked, k).unwrap();
            prop_assert_eq!(rep.micro_f1, rep.accuracy);
            prop_assert!(rep.top_k_accuracy >= prev);
            prev = rep.top_k_accuracy;
            let f1s: Vec<f64> = rep.per_class_f1.iter().filter(|(c, _)| truth.contains(c)).map(|(_, f)| *f).collect();
            let lo = f1s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(rep.macro_f1 >= lo - 1e-12 && rep.macro_f1 <= hi + 1e-12);
        }
        prop_assert_eq!(prev, 1.0);
    }
}
