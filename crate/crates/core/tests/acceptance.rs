//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails. Tolerances and time budgets are pinned below.
//!
//! Run with `cargo test -p dermcascade --test acceptance`. Set
//! `DERMCASCADE_DATASET` to the public corpus (CSV or JSONL) to enable the
//! dataset-dependent checks.

use std::{
    collections::{BTreeMap, BTreeSet},
    fs,
    panic::{catch_unwind, AssertUnwindSafe},
    path::{Path, PathBuf},
    time::{Duration, Instant},
};

use dermcascade::{
    anonymizer::{anonymize_document, generate_review_partition, Judgment, LexiconSet},
    cascade::{enumerate_schedules, search_schedules, Mode, SearchConfig},
    corpus::{
        filter_by_min_frequency, load_corpus, stratified_split, ClinicalRecord, CorpusFormat, LabeledCorpus, SplitSpec,
    },
    learner::{gradient_check, LinearModel, SparseVec},
    metrics::evaluate_single_label,
    ontology::{
        derive_severity, extract_all, extract_relations, load_snapshot, OntologySnapshot, Relation, Severity,
        SeverityFlag, TranslationMap,
    },
    pipeline::{load_manifest, run_experiment, run_pipeline, ExperimentConfig, RUN_MANIFEST},
    review::{AgreementStatus, ReviewSession, VerdictStore, VerdictSubmission},
};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const METRIC_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-5;
/// Finite-difference step and the denominator floor of the relative error.
const FD_EPSILON: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-7;
const AGREEMENT_TARGET: f64 = 0.9643;
const AGREEMENT_TOL: f64 = 1e-4;
const OR_MIN_ACCURACY: f64 = 0.95;
const OR_MIN_GAIN: f64 = 0.15;
const DATASET_ENV: &str = "DERMCASCADE_DATASET";

enum Outcome {
    Pass(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: &[(&str, Duration, Check)] = &[
        ("nomenclature reproduction (47/47)", Duration::from_secs(1), nomenclature),
        ("schedule enumeration (15)", Duration::from_millis(1), schedules),
        ("severity mapping (8 subsets)", Duration::from_secs(1), severity),
        ("metrics oracle equivalence (200 instances)", Duration::from_secs(30), metrics_oracle),
        ("gradient correctness (100 instances)", Duration::from_secs(60), gradients),
        ("anonymizer guarantees (1000 documents)", Duration::from_secs(10), anonymizer),
        ("agreement arithmetic (112 shared, 4 conflicts)", Duration::from_secs(5), agreement),
        ("cascade fixture behavior (a)-(d)", Duration::from_secs(300), cascade_fixture),
        ("optional dataset checks", Duration::from_secs(300), dataset),
        ("reproducibility from manifest", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed();
        let line = match result {
            Ok(Outcome::Pass(detail)) if took <= *budget => format!("PASS  {name}: {detail} [{took:.2?}]"),
            Ok(Outcome::Pass(detail)) => {
                failed += 1;
                format!("FAIL  {name}: {detail}, but took {took:.2?} > budget {budget:?}")
            }
            Ok(Outcome::Skip(why)) => format!("SKIP  {name}: {why}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL  {name}: {msg} [{took:.2?}]")
            }
        };
        println!("{line}");
    }
    println!("{} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

/// The published disease -> (type, severity, site) table.
const NOMENCLATURE: &str = "\
carcinoma de células basales|proceso neoplasico|importante|piel
psoriasis|proceso autoinmune|inofensivo|extremidades
nevus melanocítico|precancer|inofensivo|todo
acné|enfermedad|leve|todo
queratosis actínica|precancer|inofensivo|piel
carcinoma de células escamosas|proceso neoplasico|extrema|piel
eccema|enfermedad|inofensivo|mano
queratosis seborreica|tumor benigno|inofensivo|piel
dermatitis atópica|enfermedad|inofensivo|articulaciones
sin diagnóstico|sin enfermedad|inofensivo|todo
nevus melanocítico adquirido|proceso neoplasico|inofensivo|extremidades
melanoma|proceso neoplasico|extrema|todo
lupus eritematoso|proceso autoinmune|extrema|tejido conectivo
verruga periungueal|infeccion|inofensivo|mano
urticaria crónica|sintoma|inofensivo|todo
hemangioma|tumor benigno|leve|todo
alopecia areata|proceso autoinmune|inofensivo|cabeza
quiste epidérmico|anormalidad|leve|cara
fibroma|tumor benigno|leve|pierna
llaga|sintoma|inofensivo|boca
rosácea|enfermedad|inofensivo|cara
nevus melanocítico atípico|proceso neoplasico|importante|torso
granuloma|infeccion|extrema|genitales
lentigo pielar|sindrome|leve|todo
liquen escleroatrófico|proceso autoinmune|leve|genitales
ampollas|sintoma|inofensivo|mano
queratosis seborreica irritada|enfermedad|inofensivo|todo
pitiriasis rubra pilaris|proceso autoinmune|leve|articulaciones
alopecia cicatricial|enfermedad|inofensivo|cabeza
urticaria|funcion patologica|leve|todo
herpes zóster|infeccion|importante|torso
foliculitis|enfermedad|inofensivo|cabeza
queilitis actínica|precancer|leve|boca
acné noduloquístico|infeccion|leve|cara
prúrigo|sintoma|inofensivo|cabeza
alopecia androgenética|enfermedad|inofensivo|cabeza
nevus intradérmico|precancer|inofensivo|piel
dermatitis seborreica|proceso autoinmune|inofensivo|cara
vasculitis|proceso autoinmune|extrema|articulaciones
psoriasis palmoplantar|enfermedad|leve|extremidades
eccema crónico|enfermedad|inofensivo|mano
micosis|infeccion|importante|todo
melanoma in situ|proceso neoplasico|inofensivo|todo
reacción a fármacos|envenenamiento|inofensivo|todo
condiloma|infeccion|leve|genitales
hiperpigmentación|anormalidad|inofensivo|todo
dermatitis de contacto|enfermedad|inofensivo|mano";

fn nomenclature() -> Outcome {
    let map = TranslationMap::reference();
    let snapshot = OntologySnapshot::reference();
    let mut matches = 0;
    let mut mismatches = Vec::new();
    let rows: Vec<Vec<&str>> = NOMENCLATURE.lines().map(|l| l.split('|').collect()).collect();
    assert_eq!(rows.len(), 47);
    for row in &rows {
        let expected = [row[1], row[2], row[3]];
        match extract_relations(row[0], &map, &snapshot) {
            Ok(t) => {
                let got = [t.path_type.as_str(), t.severity.as_str(), t.site.as_str()];
                if got == expected {
                    matches += 1;
                } else {
                    mismatches.push(format!("{}: {got:?} != {expected:?}", row[0]));
                }
            }
            Err(e) => mismatches.push(format!("{}: {e}", row[0])),
        }
    }
    assert!(mismatches.is_empty(), "{matches}/47 match; {}", mismatches.join("; "));
    Outcome::Pass(format!("{matches}/47 exact"))
}

fn schedules() -> Outcome {
    let got = enumerate_schedules(Relation::ALL, 3).unwrap();
    // sum over k of n!/(n-k)!
    let n = 3u64;
    let fact = |m: u64| (1..=m).product::<u64>();
    let closed: u64 = (1..=n).map(|k| fact(n) / fact(n - k)).sum();
    assert_eq!(got.len() as u64, closed);
    let distinct: BTreeSet<Vec<Relation>> = got.iter().map(|s| s.relations().to_vec()).collect();
    assert_eq!(distinct.len(), got.len(), "duplicate schedules");
    for s in &got {
        let set: BTreeSet<_> = s.relations().iter().collect();
        assert_eq!(set.len(), s.len(), "repeated relation in {s}");
    }
    Outcome::Pass(format!("{} schedules, closed form {closed}", got.len()))
}

fn severity() -> Outcome {
    use SeverityFlag::*;
    // strongest flag wins; no flag means inoffensive
    let table: [(&[SeverityFlag], Severity); 8] = [
        (&[], Severity::Inoffensive),
        (&[Minor], Severity::Light),
        (&[Major], Severity::Important),
        (&[Morbidity], Severity::Extreme),
        (&[Minor, Major], Severity::Important),
        (&[Minor, Morbidity], Severity::Extreme),
        (&[Major, Morbidity], Severity::Extreme),
        (&[Minor, Major, Morbidity], Severity::Extreme),
    ];
    for (flags, want) in table {
        let set: BTreeSet<SeverityFlag> = flags.iter().copied().collect();
        assert_eq!(derive_severity(&set), want, "flags {flags:?}");
    }
    Outcome::Pass("8/8 subsets".into())
}

struct OracleScores {
    accuracy: f64,
    micro_f1: f64,
    macro_f1: f64,
}

/// Per-class counting straight from the definitions.
fn brute_force(truth: &[String], pred: &[String]) -> OracleScores {
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;
    let classes: BTreeSet<&String> = truth.iter().chain(pred).collect();
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    let mut f1_present = Vec::new();
    for c in classes {
        let tp = truth.iter().zip(pred).filter(|(t, p)| *t == c && *p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| *t != c && *p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, p)| *t == c && *p != c).count() as f64;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        if truth.contains(c) {
            let denom = 2.0 * tp + fp + fn_;
            f1_present.push(if denom == 0.0 { 0.0 } else { 2.0 * tp / denom });
        }
    }
    OracleScores {
        accuracy: correct / n,
        micro_f1: 2.0 * tp_all / (2.0 * tp_all + fp_all + fn_all),
        macro_f1: f1_present.iter().sum::<f64>() / f1_present.len() as f64,
    }
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0;
    for _ in 0..200 {
        let c = rng.gen_range(2..=8);
        let n = rng.gen_range(1..=100);
        let classes: Vec<String> = (0..c).map(|i| format!("c{i}")).collect();
        let truth: Vec<String> = (0..n).map(|_| classes[rng.gen_range(0..c)].clone()).collect();
        let ranked: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let mut r = classes.clone();
                r.shuffle(&mut rng);
                r
            })
            .collect();
        let top1: Vec<String> = ranked.iter().map(|r| r[0].clone()).collect();
        let oracle = brute_force(&truth, &top1);
        for k in [1, 2, c] {
            let rep = evaluate_single_label(&truth, &ranked, k).unwrap();
            let topk = truth.iter().zip(&ranked).filter(|(t, r)| r[..k].contains(t)).count() as f64 / n as f64;
            let close = |a: f64, b: f64, what: &str| assert!((a - b).abs() <= METRIC_TOL, "{what}: {a} vs {b}");
            close(rep.accuracy, oracle.accuracy, "accuracy");
            close(rep.micro_f1, oracle.micro_f1, "micro-F1");
            close(rep.macro_f1, oracle.macro_f1, "macro-F1");
            close(rep.top_k_accuracy, topk, "top-k accuracy");
            assert_eq!(rep.micro_f1, rep.accuracy, "micro-F1 must equal accuracy identically");
            if k == 1 {
                assert_eq!(rep.top_k_accuracy, rep.accuracy);
            }
            if k == c {
                assert_eq!(rep.top_k_accuracy, 1.0);
            }
            checks += 1;
        }
    }
    Outcome::Pass(format!("{checks} metric reports agree within {METRIC_TOL:e}"))
}

/// Mean cross-entropy plus `l2 * |W|^2`, on dense inputs.
fn oracle_loss(w: &[Vec<f64>], b: &[f64], xs: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z: Vec<f64> =
            w.iter().zip(b).map(|(row, bc)| bc + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    total / xs.len() as f64 + l2 * w.iter().flatten().map(|v| v * v).sum::<f64>()
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = rng.gen_range(2..=5);
        let f = rng.gen_range(1..=50);
        let n = rng.gen_range(1..=20);
        let l2 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.01) };
        let w: Vec<Vec<f64>> = (0..c).map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect())
            .collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();

        let model = LinearModel {
            class_names: (0..c).map(|i| format!("c{i}")).collect(),
            num_features: f,
            weights: w.iter().flatten().copied().collect(),
            bias: b.clone(),
        };
        let sparse: Vec<SparseVec> = xs.iter().map(|x| SparseVec::from_dense(x)).collect();
        let lib_loss = model.loss(&sparse, &ys, l2);
        let ref_loss = oracle_loss(&w, &b, &xs, &ys, l2);
        assert!((lib_loss - ref_loss).abs() <= 1e-10 * ref_loss.abs().max(1.0), "loss {lib_loss} vs {ref_loss}");

        let (gw, gb) = model.gradient(&sparse, &ys, l2);
        let rel = |a: f64, num: f64| (a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR);
        for ci in 0..c {
            for fi in 0..f {
                let mut wp = w.clone();
                wp[ci][fi] += FD_EPSILON;
                let mut wm = w.clone();
                wm[ci][fi] -= FD_EPSILON;
                let num =
                    (oracle_loss(&wp, &b, &xs, &ys, l2) - oracle_loss(&wm, &b, &xs, &ys, l2)) / (2.0 * FD_EPSILON);
                worst = worst.max(rel(gw[ci * f + fi], num));
            }
            let mut bp = b.clone();
            bp[ci] += FD_EPSILON;
            let mut bm = b.clone();
            bm[ci] -= FD_EPSILON;
            let num = (oracle_loss(&w, &bp, &xs, &ys, l2) - oracle_loss(&w, &bm, &xs, &ys, l2)) / (2.0 * FD_EPSILON);
            worst = worst.max(rel(gb[ci], num));
        }
        worst = worst.max(gradient_check(&model, &sparse, &ys, l2, FD_EPSILON).unwrap());
    }
    assert!(worst < GRADIENT_TOL, "max relative error {worst:e}");
    Outcome::Pass(format!("max relative error {worst:.2e} < {GRADIENT_TOL:e}"))
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

fn anonymizer() -> Outcome {
    let lex = LexiconSet::builtin();
    let protected: BTreeSet<&String> = lex.frequent_words.iter().chain(&lex.domain_exceptions).collect();
    let single = |set: &BTreeSet<String>| -> Vec<String> {
        set.iter().filter(|w| !w.contains(' ') && !protected.contains(w)).cloned().collect()
    };
    let names: Vec<String> = [single(&lex.given_names), single(&lex.surnames), single(&lex.places)].concat();
    let exceptions: Vec<String> = lex.domain_exceptions.iter().filter(|w| !w.contains(' ')).cloned().collect();
    let titles: Vec<String> = lex.title_patterns.iter().cloned().collect();
    let all_lexical: BTreeSet<&String> =
        lex.given_names.iter().chain(&lex.surnames).chain(&lex.places).chain(protected.iter().copied()).collect();
    let filler: Vec<&str> = [
        "paciente",
        "acude",
        "lesión",
        "eritematosa",
        "consulta",
        "refiere",
        "prurito",
        "placa",
        "tratamiento",
        "control",
        "revisión",
        "zona",
        "dorsal",
        "biopsia",
        "evolución",
        "aspecto",
    ]
    .into_iter()
    .filter(|w| !all_lexical.contains(&w.to_string()))
    .collect();
    assert!(names.len() > 20 && !exceptions.is_empty() && !titles.is_empty() && filler.len() > 8);

    let capitalize = |w: &str, rng: &mut ChaCha8Rng| -> String {
        match rng.gen_range(0..3) {
            0 => w.to_string(),
            1 => w.to_uppercase(),
            _ => {
                let mut cs = w.chars();
                cs.next().map(|c| c.to_uppercase().chain(cs).collect()).unwrap_or_default()
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let name_set: BTreeSet<&String> = names.iter().collect();
    let (mut planted_names, mut planted_exceptions, mut planted_digits) = (0usize, 0usize, 0usize);
    for _ in 0..1000 {
        let mut parts: Vec<String> = Vec::new();
        let mut exc_here = 0;
        for _ in 0..rng.gen_range(8..30) {
            match rng.gen_range(0..10) {
                0 | 1 => {
                    parts.push(capitalize(names.choose(&mut rng).unwrap(), &mut rng));
                    planted_names += 1;
                }
                2 => {
                    parts.push(format!("{}", rng.gen_range(0..100_000)));
                    planted_digits += 1;
                }
                3 => {
                    parts.push(capitalize(exceptions.choose(&mut rng).unwrap(), &mut rng));
                    exc_here += 1;
                }
                4 => {
                    parts.push(format!("{}.", capitalize(titles.choose(&mut rng).unwrap(), &mut rng)));
                    if rng.gen_bool(0.5) {
                        parts.push(capitalize(exceptions.choose(&mut rng).unwrap(), &mut rng));
                        exc_here += 1;
                    } else {
                        parts.push(capitalize(names.choose(&mut rng).unwrap(), &mut rng));
                        planted_names += 1;
                    }
                }
                5 => parts.push(format!(
                    "{}-{}/{}",
                    rng.gen_range(1..31),
                    rng.gen_range(1..13),
                    rng.gen_range(1950..2024)
                )),
                _ => parts.push(filler.choose(&mut rng).unwrap().to_string()),
            }
        }
        planted_exceptions += exc_here;
        let text = parts.join(" ");
        let out = anonymize_document(&text, &lex);
        assert!(!out.masked_text.chars().any(|c| c.is_numeric()), "digits survive in {:?}", out.masked_text);
        let out_words = words(&out.masked_text);
        let leaked: Vec<&String> = out_words.iter().filter(|w| name_set.contains(w)).collect();
        assert!(leaked.is_empty(), "names {leaked:?} survive in {:?}", out.masked_text);
        let exc_out = out_words.iter().filter(|w| exceptions.contains(w)).count();
        assert_eq!(exc_out, exc_here, "exception words masked in {text:?} -> {:?}", out.masked_text);
        let again = anonymize_document(&out.masked_text, &lex);
        assert_eq!(again.masked_text, out.masked_text, "not idempotent");
    }
    Outcome::Pass(format!(
        "{planted_names} names masked, {planted_exceptions} exception words kept, {planted_digits}+ digit runs removed"
    ))
}

fn agreement() -> Outcome {
    let records: Vec<ClinicalRecord> =
        (0..1000).map(|i| ClinicalRecord::new(format!("doc-{i:04}"), format!("informe {i}"), "eccema")).collect();
    let partition = generate_review_partition(&LabeledCorpus::new(records).unwrap(), 1.0, 0.112, 3).unwrap();
    assert_eq!(partition.shared.len(), 112);
    let session = ReviewSession::new(partition, ["a".into(), "b".into()], VerdictStore::in_memory()).unwrap();
    let shared: Vec<String> = session.partition().shared.iter().cloned().collect();
    let conflicts: BTreeSet<&String> = shared.iter().step_by(28).collect();
    assert_eq!(conflicts.len(), 4);
    for id in &shared {
        for (who, j) in [
            ("a", Judgment::Correct),
            ("b", if conflicts.contains(id) { Judgment::UnderMasked } else { Judgment::Correct }),
        ] {
            let sub = VerdictSubmission {
                record_id: id.clone(),
                reviewer_id: who.into(),
                judgment: j,
                note: None,
                supersede: false,
            };
            session.submit_at(sub, 0).unwrap();
        }
    }
    let AgreementStatus::Complete(a) = session.agreement().unwrap() else {
        panic!("agreement should be complete");
    };
    let expected = (112.0 - 4.0) / 112.0;
    assert!((a.raw_agreement - expected).abs() <= METRIC_TOL);
    assert!((a.raw_agreement - AGREEMENT_TARGET).abs() <= AGREEMENT_TOL, "{}", a.raw_agreement);
    let listed: BTreeSet<String> = session.disagreements().into_iter().map(|d| d.record_id).collect();
    assert_eq!(listed, conflicts.into_iter().cloned().collect());
    Outcome::Pass(format!("raw agreement {:.4}, kappa {:.4}", a.raw_agreement, a.kappa))
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/synthetic")
}

fn fixture_config() -> ExperimentConfig {
    let dir = assets();
    ExperimentConfig {
        corpus: dir.join("corpus.jsonl").display().to_string(),
        snapshot: Some(dir.join("snapshot.tsv")),
        translation: Some(dir.join("translation.tsv")),
        ..ExperimentConfig::default()
    }
}

fn cascade_fixture() -> Outcome {
    let config = fixture_config();
    let exp = run_experiment(&config).unwrap();
    assert_eq!(exp.data.documents, 5000);
    assert_eq!(exp.data.labels_after_filter, 25);
    let acc = |model: &str, mode: Option<Mode>| {
        exp.reports.iter().find(|r| r.model == model && r.mode == mode).map(|r| r.report.accuracy).unwrap()
    };
    let vanilla = acc("vanilla", None);
    let or = acc("cascade", Some(Mode::OR));
    let pr = acc("cascade", Some(Mode::PR));
    assert!(or >= OR_MIN_ACCURACY, "(a) OR accuracy {or:.4} < {OR_MIN_ACCURACY}");
    assert!(or - vanilla >= OR_MIN_GAIN, "(b) OR {or:.4} - vanilla {vanilla:.4} < {OR_MIN_GAIN}");
    assert!(pr >= vanilla, "(c) PR {pr:.4} < vanilla {vanilla:.4}");

    // (d) on an inner split of the training part, as the pipeline does
    let corpus = load_corpus(&assets().join("corpus.jsonl"), CorpusFormat::Jsonl).unwrap();
    let filtered = filter_by_min_frequency(&corpus, config.min_count).unwrap();
    let outer = SplitSpec { train_fraction: config.train_fraction, seed: config.seed, stratified: true };
    let (train, _) = stratified_split(&filtered, &outer).unwrap();
    let (fit, validation) = stratified_split(&train, &SplitSpec { seed: config.seed + 1, ..outer }).unwrap();
    let triples = extract_all(
        filtered.labels(),
        &TranslationMap::load(&assets().join("translation.tsv")).unwrap(),
        &load_snapshot(&assets().join("snapshot.tsv")).unwrap(),
    )
    .unwrap();
    let search = SearchConfig {
        cascade: config.cascade.clone(),
        max_len: None,
        mode: Mode::PR,
        rank_by: config.rank_by,
        k: config.k,
    };
    let ranked = search_schedules(&fit, &validation, &triples, Relation::ALL, &search).unwrap();
    let top = &ranked[0].schedule;
    assert!(top.contains(Relation::Type) && top.contains(Relation::Site), "(d) top schedule {top}");
    Outcome::Pass(format!(
        "(a) OR {or:.4} (b) gain {:.4} over vanilla {vanilla:.4} (c) PR {pr:.4} (d) top schedule {top}",
        or - vanilla
    ))
}

fn dataset() -> Outcome {
    let Some(path) = std::env::var_os(DATASET_ENV).filter(|p| !p.is_empty()) else {
        return Outcome::Skip(format!("{DATASET_ENV} not set; public dataset absent"));
    };
    let path = PathBuf::from(path);
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => CorpusFormat::Csv,
        _ => CorpusFormat::Jsonl,
    };
    let corpus = load_corpus(&path, format).unwrap();
    assert_eq!(corpus.len(), 8881, "corpus size");
    assert_eq!(corpus.num_labels(), 173, "distinct labels");
    let expected: BTreeMap<usize, usize> =
        [(2, 173), (10, 76), (25, 44), (50, 27), (61, 25), (75, 20), (100, 15)].into();
    for (&t, &want) in &expected {
        let got = corpus.label_counts().values().filter(|&&c| c >= t).count();
        assert_eq!(got, want, "classes at threshold {t}");
    }
    Outcome::Pass("8881 documents, 173 labels, 7/7 threshold counts".into())
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config();
    config.cascade.train.epochs = 3;
    config.schedules = vec!["sit,t".into()];
    config.output = dir.path().join("first");
    let first = run_pipeline(&config).unwrap();
    let manifest = load_manifest(&first.output.join(RUN_MANIFEST)).unwrap();
    let mut again = manifest.config.clone();
    again.output = dir.path().join("second");
    run_pipeline(&again).unwrap();

    let mut compared = 0;
    for entry in fs::read_dir(&config.output).unwrap() {
        let name = entry.unwrap().file_name();
        let n = name.to_string_lossy();
        if n.starts_with("report_") || n.starts_with("confusion_") || n == "summary.json" {
            assert_eq!(
                fs::read(config.output.join(&name)).unwrap(),
                fs::read(again.output.join(&name)).unwrap(),
                "{n} differs"
            );
            compared += 1;
        }
    }
    assert!(compared >= 4);
    Outcome::Pass(format!("{compared} report files byte-identical"))
}
