use std::io::Write;
use std::path::{Path, PathBuf};

use listdistill::data_io::{load_corpus, load_sts_tsv};
use listdistill::encoder::{
    load_checkpoint, mean_teacher_kcc, save_checkpoint, train as run_training, Student,
};
use listdistill::metrics::{
    alignment, build_ranking_groups, evaluate_ranking, evaluate_sts, uniformity, EvalPairSet,
    SentenceEncoder, StsExample,
};
use listdistill::teacher::{load_teacher, save_teacher, TeacherEnsemble, TeacherStore};
use listdistill::vectors::cosine_similarity;

use crate::config::RunConfig;
use crate::{fmt5, EvalRankArgs, EvalStsArgs, ExportArgs, Failure, GeometryArgs, TrainArgs};

const MAX_TEACHERS: usize = 2;

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn report_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".report");
    PathBuf::from(name)
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(c) = &args.corpus {
        config.corpus = Some(c.clone());
    }
    if !args.teachers.is_empty() {
        config.teachers = args.teachers.clone();
    }
    if let Some(v) = &args.validation {
        config.validation = Some(v.clone());
    }
    if let Some(o) = &args.out {
        config.out = Some(o.clone());
    }
    if let Some(r) = &args.report {
        config.report = Some(r.clone());
    }
    if let Some(seed) = args.seed {
        config.train.seed = seed;
    }
    if let Some(m) = &args.method {
        config.train.method = m.parse()?;
    }
    if config.teachers.len() > MAX_TEACHERS {
        return Err(Failure::Config(format!(
            "at most two teachers are supported, got {}",
            config.teachers.len()
        )));
    }
    if config.teachers.is_empty() {
        return Err(Failure::Config(
            "at least one teacher is required (--teacher or `teacher`)".into(),
        ));
    }
    let corpus_path = config
        .corpus
        .clone()
        .ok_or_else(|| Failure::Config("no corpus given (--corpus or `corpus`)".into()))?;
    let out_path = config
        .out
        .clone()
        .ok_or_else(|| Failure::Config("no output path given (--out or `out`)".into()))?;
    config.train.validate()?;

    let mut corpus = load_corpus(&corpus_path)?;
    corpus.deduplicate();
    let stores = config
        .teachers
        .iter()
        .map(load_teacher)
        .collect::<Result<Vec<_>, _>>()?;
    let teachers = TeacherEnsemble::new(stores, config.train.weights.alpha)?;
    let validation = match &config.validation {
        Some(p) => load_sts_tsv(p)?,
        None => Vec::new(),
    };

    let report = run_training(&config.train, &corpus, &teachers, &validation)?;
    save_checkpoint(&report.best, &out_path)?;

    let t = &config.train;
    let mut lines = vec![
        format!("method: {}", t.method),
        format!("steps: {}", report.history.len()),
        format!("seed: {}", t.seed),
        format!("corpus_sentences: {}", corpus.len()),
        format!("teachers: {}", teachers.teachers.len()),
        format!("selection: {}", report.selection),
        format!("best_step: {}", report.best_step),
        format!(
            "best_value: {}",
            report.best_value.map_or("none".into(), fmt5)
        ),
    ];
    if let Some(last) = report.history.last() {
        lines.push(format!("final_info_nce: {}", fmt5(last.info_nce)));
        lines.push(format!("final_consistency: {}", fmt5(last.consistency)));
        lines.push(format!("final_rank: {}", fmt5(last.rank)));
        lines.push(format!("final_total: {}", fmt5(last.total)));
    }
    if !validation.is_empty() {
        lines.push(format!(
            "validation_spearman: {}",
            fmt5(evaluate_sts(&report.best, &validation)?)
        ));
    }
    if corpus.len() >= 2 {
        let kcc = mean_teacher_kcc(
            &report.best,
            &corpus,
            &teachers,
            t.batch_size.min(corpus.len()),
            t.seed,
        )?;
        lines.push(format!("teacher_kcc: {}", fmt5(kcc)));
    }
    lines.push(format!("checkpoint: {}", out_path.display()));
    let text = lines.join("\n") + "\n";
    std::fs::write(
        config.report.unwrap_or_else(|| report_path(&out_path)),
        &text,
    )?;
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn load_nonempty_sts(path: &Path) -> Result<Vec<StsExample>, Failure> {
    let data = load_sts_tsv(path)?;
    if data.is_empty() {
        return Err(Failure::Empty(format!(
            "{}: no labeled pairs",
            path.display()
        )));
    }
    Ok(data)
}

pub fn eval_sts(args: &EvalStsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let student = load_checkpoint(&args.checkpoint)?;
    let mut rows = Vec::with_capacity(args.sts.len());
    for path in &args.sts {
        let data = load_nonempty_sts(path)?;
        rows.push((stem(path), evaluate_sts(&student, &data)?));
    }
    let avg = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    for (name, value) in &rows {
        writeln!(out, "{name}\t{}", fmt5(*value))?;
    }
    writeln!(out, "avg\t{}", fmt5(avg))?;
    Ok(())
}

pub fn eval_rank(args: &EvalRankArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let student = load_checkpoint(&args.checkpoint)?;
    let data = load_sts_tsv(&args.sts)?;
    let groups = build_ranking_groups(&data);
    if groups.is_empty() {
        return Err(Failure::Empty(format!(
            "{}: no sentence has more than three labeled partners",
            args.sts.display()
        )));
    }
    let (kcc, ndcg) = evaluate_ranking(&student, &groups)?;
    writeln!(out, "kcc\t{}", fmt5(kcc))?;
    writeln!(out, "ndcg\t{}", fmt5(ndcg))?;
    writeln!(out, "groups\t{}", groups.len())?;
    Ok(())
}

pub fn export_embeddings(args: &ExportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let student = load_checkpoint(&args.checkpoint)?;
    let mut corpus = load_corpus(&args.corpus)?;
    if corpus.is_empty() {
        return Err(Failure::Data(format!(
            "{}: corpus is empty",
            args.corpus.display()
        )));
    }
    corpus.deduplicate();
    let mut store = TeacherStore::new(stem(&args.out), student.params.dim);
    for sentence in &corpus.sentences {
        store.insert(sentence.clone(), student.embed(sentence)?)?;
    }
    save_teacher(&store, &args.out)?;
    writeln!(out, "sentences\t{}", store.len())?;
    writeln!(out, "dim\t{}", store.dim())?;
    Ok(())
}

/// Gold buckets `[0,1) .. [3,4)` and `[4,5]`.
const GOLD_BUCKETS: usize = 5;
const COSINE_BINS: usize = 20;

fn histogram(student: &Student, data: &[StsExample]) -> Result<Vec<[usize; COSINE_BINS]>, Failure> {
    let mut counts = vec![[0usize; COSINE_BINS]; GOLD_BUCKETS];
    for ex in data {
        let c = cosine_similarity(
            &student.embed(&ex.sentence1)?,
            &student.embed(&ex.sentence2)?,
        )?;
        let bucket = (ex.gold.floor() as usize).min(GOLD_BUCKETS - 1);
        let bin = (((c + 1.0) / 2.0 * COSINE_BINS as f64).floor() as usize).min(COSINE_BINS - 1);
        counts[bucket][bin] += 1;
    }
    Ok(counts)
}

pub fn report_geometry(args: &GeometryArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if !args.align_threshold.is_finite() {
        return Err(Failure::Config(format!(
            "invalid --align-threshold {}",
            args.align_threshold
        )));
    }
    let student = load_checkpoint(&args.checkpoint)?;
    let data = load_sts_tsv(&args.sts)?;
    let mut pairs = EvalPairSet::default();
    for ex in data.iter().filter(|e| e.gold >= args.align_threshold) {
        pairs
            .positive_pairs
            .push((student.embed(&ex.sentence1)?, student.embed(&ex.sentence2)?));
    }
    if pairs.positive_pairs.is_empty() {
        return Err(Failure::Empty(format!(
            "{}: no pairs with gold >= {}",
            args.sts.display(),
            args.align_threshold
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for ex in &data {
        for s in [&ex.sentence1, &ex.sentence2] {
            if seen.insert(s.as_str()) {
                pairs.pool.push(student.embed(s)?);
            }
        }
    }
    let align = alignment(&pairs)?;
    let uniform = uniformity(&pairs)?;
    writeln!(out, "align\t{}", fmt5(align))?;
    writeln!(out, "uniform\t{}", fmt5(uniform))?;

    if let Some(path) = &args.histogram {
        let counts = histogram(&student, &data)?;
        let mut tsv = String::from("gold_low\tgold_high\tcos_low\tcos_high\tcount\n");
        let width = 2.0 / COSINE_BINS as f64;
        for (b, row) in counts.iter().enumerate() {
            for (k, n) in row.iter().enumerate() {
                let lo = -1.0 + k as f64 * width;
                tsv.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{n}\n",
                    fmt5(b as f64),
                    fmt5((b + 1) as f64),
                    fmt5(lo),
                    fmt5(lo + width)
                ));
            }
        }
        std::fs::write(path, tsv)?;
    }
    Ok(())
}
