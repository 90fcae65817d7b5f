use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use loopcap_core::augment::{Augmenter, ImageBuffer, Sample};
use loopcap_core::corpus::{apply_quality_filter, compute_stats, load_corpus, remap_splits, Corpus, Split};
use loopcap_core::learner::{build_learner, Learner};
use loopcap_core::metrics::{aligned_csv, load_hypotheses, EvalPair, MetricReport, MicroMode};
use loopcap_core::synthetic::{self, Layout};
use loopcap_core::taskgen::{build_clusters, ClusterConfig, ClusterFile, EmbeddingTable, PosLexicon};
use loopcap_core::text::metric_tokens;
use loopcap_core::tokenizer::load_vocab;
use loopcap_core::trainer::{
    ablate_fraction, ablate_memory, forgetting_demo, load_learner_from, order_tasks, paraphrase_pool, ImageDir,
    ImageSource, RunConfig, RunDir, SyntheticImages, Task, Trainer,
};
use loopcap_service::{Catalog, Session, SessionOptions};

use crate::{
    AblateCommand, AdaptArgs, AugmentCommand, ClusterArgs, Command, ConfigArgs, DataArgs, DemoCommand, EvaluateArgs,
    FilterArgs, IngestArgs, Micro, OnOff, PretrainArgs, PreviewArgs, ReportArgs, SequenceArgs, ServeArgs, StatsArgs,
    TokenizeArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Filter(a) => filter(a),
        Command::Stats(a) => stats(a),
        Command::Cluster(a) => cluster(a),
        Command::Tokenize(a) => tokenize(a),
        Command::Augment(AugmentCommand::Preview(a)) => preview(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Adapt(a) => adapt(a),
        Command::Ablate(AblateCommand::Memory(a)) => ablate(a.seq, &a.run_dir, false),
        Command::Ablate(AblateCommand::Fraction(a)) => ablate(a.seq, &a.run_dir, true),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
        Command::Demo(DemoCommand::Forgetting { seed }) => demo_forgetting(seed),
        Command::Demo(DemoCommand::Synthetic {
            out_dir,
            clusters,
            train,
            val,
            test,
            captions,
            seed,
        }) => demo_synthetic(
            &out_dir,
            Layout {
                clusters,
                train,
                val,
                test,
                captions_per_image: captions,
                seed,
            },
        ),
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    // Corpus files carry a split per image; the default only matters for
    // hand-written files without one.
    load_corpus(path, Split::Train).with_context(|| format!("loading corpus {}", path.display()))
}

fn split_counts(c: &Corpus) -> String {
    let s = compute_stats(c);
    Split::ALL
        .iter()
        .map(|sp| format!("{sp}={}", s.per_split.get(sp).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn ingest(a: IngestArgs) -> Result<()> {
    if a.annotations.len() != a.split.len() {
        bail!("--annotations and --split must be given the same number of times");
    }
    let mut parts = Vec::new();
    for (path, tag) in a.annotations.iter().zip(&a.split) {
        let split: Split = tag.parse()?;
        parts.push((split, read_corpus_as(path, split)?));
    }
    let corpus = if a.remap {
        let find = |s: Split| parts.iter().find(|(p, _)| *p == s).map(|(_, c)| c);
        let (Some(train), Some(val)) = (find(Split::Train), find(Split::Val)) else {
            bail!("--remap needs one train and one val annotation file");
        };
        let (tr, va, te) = remap_splits(train, val, a.holdout, a.seed)?;
        Corpus::merge([&tr, &va, &te])?
    } else {
        Corpus::merge(parts.iter().map(|(_, c)| c))?
    };
    corpus.write_json(&a.out)?;
    println!("{} images ({})", corpus.len(), split_counts(&corpus));
    Ok(())
}

fn read_corpus_as(path: &Path, split: Split) -> Result<Corpus> {
    load_corpus(path, split).with_context(|| format!("loading annotations {}", path.display()))
}

fn filter(a: FilterArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let (filtered, excluded) = apply_quality_filter(&corpus, &a.marker);
    let mut per_split: BTreeMap<Split, usize> = BTreeMap::new();
    for id in &excluded {
        if let Some(img) = corpus.get(*id) {
            *per_split.entry(img.split).or_default() += 1;
        }
    }
    filtered.write_json(&a.out)?;
    println!("excluded {} images: {per_split:?}", excluded.len());
    println!("kept {} images ({})", filtered.len(), split_counts(&filtered));
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    match a.clusters {
        Some(path) => {
            let clusters = ClusterFile::load(&path)?;
            let rows = clusters.stats_rows(&corpus);
            if a.json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
                return Ok(());
            }
            let mut table = vec![["cluster", "train", "val", "test", "all", "WT"].map(String::from).to_vec()];
            for r in rows {
                table.push(vec![
                    r.cluster.map_or("all".into(), |c| c.to_string()),
                    r.train.to_string(),
                    r.val.to_string(),
                    r.test.to_string(),
                    r.all.to_string(),
                    r.word_types.to_string(),
                ]);
            }
            print!("{}", aligned_csv(&table));
        }
        None => {
            let s = compute_stats(&corpus);
            if a.json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("{} images ({}), {} word types", s.total, split_counts(&corpus), s.word_types);
            }
        }
    }
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let lexicon = match &a.lexicon {
        Some(p) => PosLexicon::load(p)?,
        None => PosLexicon::shipped(),
    };
    // Only words that occur in captions can ever be looked up.
    let vocab: HashSet<String> = corpus
        .images()
        .iter()
        .flat_map(|i| i.captions.iter().flat_map(|c| c.tokens.iter().cloned()))
        .collect();
    let embeddings = EmbeddingTable::load(&a.embeddings, Some(&vocab))?;
    let config = ClusterConfig {
        k: a.k,
        min_freq: a.min_freq,
        seed: a.seed,
    };
    let outcome = build_clusters(&corpus, &lexicon, &embeddings, &config)?;
    let file = ClusterFile::from_outcome(&outcome, &corpus, config);
    file.write(&a.out)?;
    println!(
        "{} keywords ({} without embeddings), final WCSS {:.6} after {} iterations",
        outcome.keywords.len(),
        outcome.dropped_keywords.len(),
        outcome.kmeans.wcss(),
        outcome.kmeans.iterations
    );
    for spec in &outcome.specs {
        println!("cluster {}: {}", spec.cluster_id, spec.keywords.join(", "));
    }
    println!("unassigned images: {}", outcome.assignment.unassigned.len());
    Ok(())
}

fn tokenize(a: TokenizeArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let ids = vocab.tokenize(&a.text);
    for id in ids {
        println!("{id}\t{}", vocab.token(id).unwrap_or("?"));
    }
    Ok(())
}

fn preview(a: PreviewArgs) -> Result<()> {
    let mut config = RunConfig::default();
    config.augment.mode = a.mode.parse()?;
    config.augment.factor = a.factor;
    config.augment.seed = a.seed;
    config.thesaurus = a.thesaurus;
    config.paraphrase_url = a.paraphrase_url;
    config.validate()?;
    let image = ImageBuffer::open(&a.image)?;
    let augmenter = Augmenter::new(config.augment.clone(), paraphrase_pool(&config)?)?;
    let sample = Sample::new(0, 0, Split::Train, Arc::new(image), metric_tokens(&a.caption));
    let out = augmenter.expand_batch(&[sample], 0)?;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for s in &out {
        let name = format!("copy_{:02}.png", s.lineage.copy);
        if let Some(dir) = &a.out_dir {
            std::fs::write(dir.join(&name), s.image.encode_png())?;
        }
        println!("{name}\t{}", s.caption.join(" "));
    }
    Ok(())
}

fn micro(m: Micro) -> MicroMode {
    match m {
        Micro::Pooled => MicroMode::Pooled,
        Micro::Weighted => MicroMode::Weighted,
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let hyps = load_hypotheses(&a.hyp)?;
    let corpus = read_corpus(&a.refs)?;
    let clusters = ClusterFile::load(&a.clusters)?;
    let split: Split = a.split.parse()?;
    let mut per_cluster: BTreeMap<u32, Vec<EvalPair>> = BTreeMap::new();
    let mut missing = 0usize;
    for id in clusters.cluster_ids() {
        let mut pairs = Vec::new();
        for image_id in clusters.ids(id, split) {
            let Some(hyp) = hyps.get(image_id) else {
                missing += 1;
                continue;
            };
            let img = corpus.get(*image_id).with_context(|| format!("image {image_id} not in corpus"))?;
            let refs = img.captions.iter().map(|c| metric_tokens(&c.text)).collect();
            pairs.push(EvalPair::new(*image_id, metric_tokens(hyp), refs)?);
        }
        per_cluster.insert(id, pairs);
    }
    if missing > 0 {
        tracing::warn!(missing, "images without a hypothesis were skipped");
    }
    let report = MetricReport::build(&per_cluster, micro(a.micro))?;
    if let Some(out) = &a.out {
        report.write(out, Some(&out.with_extension("csv")))?;
    }
    print!("{}", report.to_csv());
    Ok(())
}

fn load_config(c: &ConfigArgs, extra: &[String]) -> Result<RunConfig> {
    let mut overrides = c.overrides.clone();
    overrides.extend_from_slice(extra);
    Ok(RunConfig::load(c.config.as_deref(), &overrides)?)
}

fn image_source(images: Option<&Path>, synthetic: bool) -> Arc<dyn ImageSource> {
    match images {
        Some(root) => Arc::new(ImageDir { root: root.to_path_buf() }),
        None => {
            debug_assert!(synthetic);
            Arc::new(SyntheticImages::default())
        }
    }
}

fn data_source(d: &DataArgs) -> Arc<dyn ImageSource> {
    image_source(d.images.as_deref(), d.synthetic_images)
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    let config = load_config(&a.config, &[])?;
    let corpus = read_corpus(&a.data.corpus)?;
    let base = Task::from_corpus(&corpus, data_source(&a.data).as_ref())?;
    let dir = RunDir::create(&a.run_dir)?;
    dir.write_config(&config)?;
    let mut learner = build_learner(&config.learner)?;
    let mut trainer = Trainer::new(config, dir.events()?)?;
    let log = trainer.pretrain(learner.as_mut(), &base)?;
    dir.save_learner(learner.as_ref())?;
    dir.write_json("pretrain", &serde_json::to_string_pretty(&log)?)?;
    println!(
        "pretrained on {} samples over {} epochs; best val BLEU-4 {}",
        base.train.len(),
        log.epochs.len(),
        log.best_val_bleu4.map_or("n/a".into(), |b| format!("{b:.4}"))
    );
    Ok(())
}

fn initial_learner(init: Option<&Path>, config: &RunConfig) -> Result<Box<dyn Learner>> {
    match init {
        Some(p) if p.is_dir() => Ok(RunDir::create(p)?.load_learner(config)?),
        Some(p) => Ok(load_learner_from(p, config)?),
        None => {
            tracing::warn!("no --init given; adapting from an empty learner");
            Ok(build_learner(&config.learner)?)
        }
    }
}

fn sequence_tasks(s: &SequenceArgs, config: &RunConfig) -> Result<Vec<Task>> {
    let corpus = read_corpus(&s.data.corpus)?;
    let clusters = ClusterFile::load(&s.tasks)?;
    let images = data_source(&s.data);
    let tasks = clusters
        .cluster_ids()
        .into_iter()
        .map(|id| Task::from_cluster(&corpus, &clusters, id, images.as_ref()))
        .collect::<loopcap_core::Result<Vec<_>>>()?;
    Ok(order_tasks(tasks, &config.task_order)?)
}

fn adapt(a: AdaptArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(da) = &a.da {
        extra.push(format!("augment.mode={da}"));
    }
    if let Some(m) = a.memory {
        extra.push(format!("memory_enabled={}", matches!(m, OnOff::On)));
    }
    let config = load_config(&a.seq.config, &extra)?;
    let tasks = sequence_tasks(&a.seq, &config)?;
    let mut learner = initial_learner(a.seq.init.as_deref(), &config)?;
    let dir = RunDir::create(&a.run_dir)?;
    dir.write_config(&config)?;
    let mut trainer = Trainer::new(config, dir.events()?)?;
    let result = trainer.run_sequence(learner.as_mut(), &tasks)?;
    dir.save_learner(learner.as_ref())?;
    if let Some(m) = trainer.memory() {
        dir.save_memory(m)?;
    }
    dir.write_csv("adapt", &result.grid.to_csv())?;
    dir.write_json("adapt", &result.grid.to_json())?;
    dir.write_json("adapt_logs", &serde_json::to_string_pretty(&result.logs)?)?;
    print!("{}", result.grid.to_csv());
    println!("replay batches: {}", result.replay_counters.len());
    Ok(())
}

fn ablate(s: SequenceArgs, run_dir: &Path, fraction: bool) -> Result<()> {
    let config = load_config(&s.config, &[])?;
    let tasks = sequence_tasks(&s, &config)?;
    let learner = initial_learner(s.init.as_deref(), &config)?;
    let dir = RunDir::create(run_dir)?;
    dir.write_config(&config)?;
    let (name, csv, json) = if fraction {
        let r = ablate_fraction(learner.as_ref(), &tasks, &config)?;
        ("ablate_fraction", r.to_csv(), serde_json::to_string_pretty(&r)?)
    } else {
        let r = ablate_memory(learner.as_ref(), &tasks, &config)?;
        ("ablate_memory", r.to_csv(), serde_json::to_string_pretty(&r)?)
    };
    dir.write_csv(name, &csv)?;
    dir.write_json(name, &json)?;
    print!("{csv}");
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let dir = &a.run_dir;
    if !dir.join("config.snapshot").exists() {
        bail!("{} is not a run directory", dir.display());
    }
    let grids = dir.join("grids");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&grids)
        .with_context(|| format!("reading {}", grids.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    for p in names {
        println!("== {}", p.file_stem().unwrap_or_default().to_string_lossy());
        print!("{}", std::fs::read_to_string(&p)?);
    }
    let events = dir.join("events.jsonl");
    if events.exists() {
        let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
        let mut replays = 0usize;
        for line in std::fs::read_to_string(&events)?.lines().filter(|l| !l.trim().is_empty()) {
            let v: serde_json::Value = serde_json::from_str(line).context("parsing events.jsonl")?;
            let kind = v["kind"].as_str().unwrap_or("?").to_string();
            if kind == "batch" && v["replayed"].as_u64().unwrap_or(0) > 0 {
                replays += 1;
            }
            *kinds.entry(kind).or_default() += 1;
        }
        println!("== events");
        for (k, n) in kinds {
            println!("{k}: {n}");
        }
        println!("replay batches: {replays}");
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut options = SessionOptions::new(&a.run_dir);
    options.auto_flush = a.auto_flush;
    if a.config.config.is_some() || !a.config.overrides.is_empty() {
        options.config = Some(load_config(&a.config, &[])?);
    }
    if let Some(path) = &a.corpus {
        if a.images.is_none() && !a.synthetic_images {
            bail!("--corpus needs --images or --synthetic-images");
        }
        options.catalog = Some(Catalog {
            corpus: read_corpus(path)?,
            images: image_source(a.images.as_deref(), a.synthetic_images),
        });
    }
    if let Some(path) = &a.clusters {
        options.clusters = Some(ClusterFile::load(path)?);
    }
    let session = Session::open(options)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        loopcap_service::serve(listener, session, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn demo_forgetting(seed: u64) -> Result<()> {
    let mut rows = vec![["memory", "A after A", "A after B", "B after B", "replays"].map(String::from).to_vec()];
    for on in [false, true] {
        let o = forgetting_demo(on, seed)?;
        rows.push(vec![
            if on { "on" } else { "off" }.to_string(),
            format!("{:.4}", o.a_after_a),
            format!("{:.4}", o.a_after_b),
            format!("{:.4}", o.b_after_b),
            o.replays.to_string(),
        ]);
    }
    print!("{}", aligned_csv(&rows));
    Ok(())
}

fn demo_synthetic(out_dir: &Path, layout: Layout) -> Result<()> {
    if layout.clusters == 0 || layout.captions_per_image == 0 {
        bail!("need at least one cluster and one caption per image");
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let corpus = synthetic::corpus(&layout)?;
    corpus.write_json(&out_dir.join("corpus.json"))?;
    synthetic::cluster_file(&corpus).write(&out_dir.join("clusters.json"))?;
    println!(
        "wrote {} images ({}) in {} clusters to {}",
        corpus.len(),
        split_counts(&corpus),
        layout.clusters,
        out_dir.display()
    );
    Ok(())
}
