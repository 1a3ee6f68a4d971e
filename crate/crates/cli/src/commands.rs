use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::json;
use tmplex_core::benchgen::{self, CorpusSpec};
use tmplex_core::eval::{self, Grouping};
use tmplex_core::keywords::{HttpProvider, KeywordProvider, StaticFileProvider};
use tmplex_core::pipeline::{parse_stream, write_structured_csv};
use tmplex_core::{snapshot, KeywordLibrary};

use crate::config::{InputFormat, Overrides, Settings};
use crate::manifest::{write_file, Manifest};
use crate::{Ablation, BenchArgs, EvalArgs, ExtractArgs, Failure, ParseArgs, Provider};

pub struct Global {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} not found", path.display())))
    }
}

fn settings(global: &Global, overrides: Overrides) -> Result<Settings, Failure> {
    let mut s = Settings::default();
    if let Some(path) = &global.config {
        require_file(path, "config file")?;
        s.apply_file(path)?;
    }
    s.apply_flags(overrides);
    Ok(s)
}

fn load_keywords(path: Option<&Path>) -> Result<KeywordLibrary, Failure> {
    match path {
        Some(p) => {
            require_file(p, "keyword file")?;
            KeywordLibrary::load_static(p).map_err(Failure::data)
        }
        None => Ok(KeywordLibrary::new()),
    }
}

/// The `Content` column of a LogHub-style structured CSV.
fn read_loghub_csv(path: &Path) -> Result<Vec<String>, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(Failure::data)?;
    let headers = rdr.headers().map_err(Failure::data)?.clone();
    let Some(col) = headers.iter().position(|h| h.trim() == "Content") else {
        return Err(Failure::data(format!(
            "{}: no Content column; found {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    };
    rdr.records()
        .map(|r| {
            r.map(|rec| rec.get(col).unwrap_or("").to_string())
                .map_err(Failure::data)
        })
        .collect()
}

pub fn parse(global: &Global, a: ParseArgs) -> Result<(), Failure> {
    let s = settings(
        global,
        Overrides {
            k: a.k,
            tau: a.tau,
            theta: a.theta,
            punct_features: a.punct_features,
            rules: a.rules,
            keywords: a.keywords,
            format: a.format,
            disable_keywords: a.disable_keywords,
            disable_index: a.disable_index,
        },
    )?;
    require_file(&a.input, "input file")?;
    let config = s.parse_config()?;
    let keywords = load_keywords(s.keywords.as_deref())?;
    let theta = config.theta;

    let mut manifest = Manifest::new(
        "parse",
        json!({
            "k": config.k,
            "tau": config.tau,
            "theta": config.theta,
            "punct_features": config.features.as_string(),
            "rules": config.rules.rules(),
            "format": s.format,
            "disable_keywords": config.disable_keywords,
            "disable_index": config.disable_index,
            "keyword_phrases": keywords.len(),
        }),
    );
    manifest.add_input("input", &a.input)?;
    if let Some(p) = &s.keywords {
        manifest.add_input("keywords", p)?;
    }
    if let Some(p) = &s.rules {
        manifest.add_input("rules", p)?;
    }

    let out = match s.format {
        InputFormat::Raw => {
            let file = File::open(&a.input).map_err(|e| Failure::usage(format!("{}: {e}", a.input.display())))?;
            parse_stream(BufReader::new(file).lines(), config, keywords)?
        }
        InputFormat::LoghubCsv => {
            let lines = read_loghub_csv(&a.input)?;
            parse_stream(lines.into_iter().map(Ok::<_, std::io::Error>), config, keywords)?
        }
    };

    // Everything is rendered before the first write, so a failure above
    // leaves no partial output behind.
    let mut csv_bytes = Vec::new();
    write_structured_csv(&out.results, &mut csv_bytes)?;
    let mut catalog = out.library.catalog_json(theta)?;
    catalog.push('\n');
    let snap = a.snapshot.as_ref().map(|_| snapshot::snapshot(&out.library));

    write_file(&a.output.join("structured.csv"), &csv_bytes)?;
    write_file(&a.output.join("templates.json"), catalog.as_bytes())?;
    manifest.add_output("structured.csv", &csv_bytes);
    manifest.add_output("templates.json", catalog.as_bytes());
    if let (Some(path), Some(bytes)) = (&a.snapshot, &snap) {
        write_file(path, bytes)?;
        manifest.add_output("snapshot", bytes);
    }
    manifest.summary = json!({
        "parsed": out.results.len(),
        "skipped": out.diagnostics.len(),
        "templates": out.library.template_count(),
        "buckets": out.library.bucket_count(),
    });
    let manifest_path = global
        .manifest
        .clone()
        .unwrap_or_else(|| a.output.join("manifest.json"));
    manifest.write(&manifest_path)?;
    eprintln!(
        "parsed {} lines into {} templates ({} skipped)",
        out.results.len(),
        out.library.template_count(),
        out.diagnostics.len()
    );
    Ok(())
}

pub fn eval(global: &Global, a: EvalArgs) -> Result<(), Failure> {
    require_file(&a.pred, "prediction file")?;
    require_file(&a.truth, "truth file")?;
    let pred = Grouping::from_csv(&a.pred).map_err(|e| Failure::data(format!("{}: {e}", a.pred.display())))?;
    let truth = Grouping::from_csv(&a.truth).map_err(|e| Failure::data(format!("{}: {e}", a.truth.display())))?;
    let report = eval::evaluate(&truth, &pred)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(Failure::data)?;
    text.push('\n');
    print!("{text}");
    if let Some(p) = &a.output {
        write_file(p, text.as_bytes())?;
    }
    if let Some(p) = &global.manifest {
        let mut m = Manifest::new("eval", json!({}));
        m.add_input("pred", &a.pred)?;
        m.add_input("truth", &a.truth)?;
        m.add_output("metrics.json", text.as_bytes());
        m.write(p)?;
    }
    Ok(())
}

pub fn bench(global: &Global, a: BenchArgs) -> Result<(), Failure> {
    let s = settings(
        global,
        Overrides {
            k: a.k,
            tau: a.tau,
            theta: a.theta,
            disable_keywords: a.ablate.contains(&Ablation::Keywords),
            disable_index: a.ablate.contains(&Ablation::Index),
            ..Default::default()
        },
    )?;
    if a.reps < 1 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let config = s.parse_config()?;
    let spec = CorpusSpec {
        n_templates: a.templates,
        n_logs: a.logs,
        seed: a.seed,
        variable_rate: a.variable_rate,
        length_jitter: a.length_jitter,
        vocab: a.vocab,
    };
    spec.validate()?;
    let corpus = benchgen::generate(&spec)?;
    let report = benchgen::time_run(&config, &corpus.keywords, &corpus.lines, a.reps)?;
    let mut ablate = a.ablate.clone();
    ablate.sort_by_key(|x| *x as u8);
    ablate.dedup();
    let out = json!({
        "corpus": spec,
        "config": { "k": config.k, "tau": config.tau, "theta": config.theta },
        "ablate": ablate,
        "mean_seconds": report.mean_seconds,
        "reps": report.reps,
        "n_logs": report.n_logs,
        "templates_found": report.templates_found,
    });
    let mut text = serde_json::to_string_pretty(&out).map_err(Failure::data)?;
    text.push('\n');
    print!("{text}");
    if let Some(p) = &a.output {
        write_file(p, text.as_bytes())?;
    }
    if let Some(p) = &global.manifest {
        let mut m = Manifest::new("bench", json!({ "corpus": spec, "ablate": ablate }));
        m.summary = json!({ "templates_found": report.templates_found });
        m.write(p)?;
    }
    Ok(())
}

/// Up to `n` lines spread evenly over the file, blank lines skipped.
fn sample_lines(path: &Path, n: usize) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if n == 0 || lines.is_empty() {
        return Ok(Vec::new());
    }
    let step = lines.len().div_ceil(n);
    Ok(lines.iter().step_by(step).take(n).map(|l| l.to_string()).collect())
}

pub fn keywords_extract(global: &Global, a: ExtractArgs) -> Result<(), Failure> {
    let budget = a.budget.unwrap_or(usize::MAX);
    let mut manifest = Manifest::new(
        "keywords extract",
        json!({ "provider": a.provider, "budget": a.budget, "sample": a.sample }),
    );
    let lib = match a.provider {
        Provider::Static => {
            let path = a
                .path
                .as_ref()
                .ok_or_else(|| Failure::usage("--provider static needs --path"))?;
            require_file(path, "keyword file")?;
            manifest.add_input("keywords", path)?;
            StaticFileProvider { path: path.clone() }.fetch(&[], budget)?
        }
        Provider::Http => {
            let input = a
                .input
                .as_ref()
                .ok_or_else(|| Failure::usage("--provider http needs --input with sample logs"))?;
            let output = a
                .output
                .as_ref()
                .ok_or_else(|| Failure::usage("--provider http needs --output for the fetched library"))?;
            require_file(input, "input file")?;
            let mut provider = HttpProvider::from_env()?;
            if let Some(dir) = &a.cache_dir {
                provider = provider.with_cache_dir(dir);
            }
            manifest.add_input("input", input)?;
            let logs = sample_lines(input, a.sample)?;
            if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
            }
            provider.fetch_and_persist(&logs, budget, output)?
        }
    };
    let text = lib.to_static_string();
    if a.provider == Provider::Static {
        if let Some(out) = &a.output {
            write_file(out, text.as_bytes())?;
        }
    }
    manifest.add_output("keywords.txt", text.as_bytes());
    print!("{text}");
    eprintln!("{} phrases", lib.len());
    if let Some(p) = &global.manifest {
        manifest.write(p)?;
    }
    Ok(())
}
