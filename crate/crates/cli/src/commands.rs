use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use degen_core::approximator::{incompatibility_check, TARGET_GAP};
use degen_core::counterexamples::{
    catalog_entry, certify_finite_pair, certify_periodic_pair, error_floor, fold_pair, make_degenerate_pair_unchecked,
    periodize, sample_manifold_with, Certificate, CertifyOptions, ClassLabels, CutoffVerdict, DegenerateParams,
    EnergyPair, ExtraPair, ParamRanges, SampleOptions,
};
use degen_core::graph::{compare_angular_wl, compare_distance_wl, NeighborhoodPolicy, Quantizer, DEFAULT_BIN_WIDTH};
use degen_core::report::{AngularVerdict, PairResult, RunReport, Timing};
use degen_core::xyz::{read_xyz, write_xyz};
use degen_core::{Error, LabeledPointCloud, Species};
use serde::Serialize;

use crate::config::{AppendixbArgs, ConfigFile, FloorArgs, GenerateArgs, SampleArgs, WlTestArgs};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn finish_report(mut report: RunReport, started: Instant, path: Option<&Path>) -> Result<()> {
    report.timing = Timing {
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(path) = path {
        write_text(path, &(report.to_json() + "\n"))?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn config_value(cfg: ConfigFile) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config is serializable")
}

fn split_numbers(spec: &str, what: &str) -> Result<(Vec<f64>, Option<String>)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(invalid(format!("{what} expects `a,b[,label]`, got `{spec}`")));
    }
    let nums = parts[..2]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| invalid(format!("{what}: `{t}` is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((nums, parts.get(2).map(|s| s.to_string())))
}

fn build_params(a: &GenerateArgs) -> Result<DegenerateParams> {
    let d = DegenerateParams::example();
    let mut params = DegenerateParams::new(
        a.p.unwrap_or(d.p),
        a.cy.unwrap_or(d.c_y),
        a.cz.unwrap_or(d.c_z),
        a.wy.unwrap_or(d.w_y),
        a.wz.unwrap_or(d.w_z),
        a.vx.unwrap_or(d.v_x),
        a.vy.unwrap_or(d.v_y),
    );
    if let Some(m) = a.min_asymmetry {
        params.min_asymmetry = m;
    }
    if let Some(spec) = &a.labels {
        let l: Vec<&str> = spec.split(',').map(str::trim).collect();
        let [c, w, v] = l.as_slice() else {
            return Err(invalid(format!("--labels expects three species `C,W,V`, got `{spec}`")));
        };
        params.labels = ClassLabels {
            c: Species::from(*c),
            w: Species::from(*w),
            v: Species::from(*v),
        };
    }
    for spec in &a.extra_w {
        let (n, label) = split_numbers(spec, "--extra-w")?;
        params.extras.push(ExtraPair::W {
            y: n[0],
            z: n[1],
            label: label.map(Species::new).unwrap_or_else(|| params.labels.w.clone()),
        });
    }
    for spec in &a.extra_v {
        let (n, label) = split_numbers(spec, "--extra-v")?;
        params.extras.push(ExtraPair::V {
            x: n[0],
            y: n[1],
            label: label.map(Species::new).unwrap_or_else(|| params.labels.v.clone()),
        });
    }
    Ok(params)
}

fn parse_periods(spec: &str) -> Result<(Option<f64>, Option<f64>)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [py, pz] = parts.as_slice() else {
        return Err(invalid(format!("--periodize expects `py,pz`, got `{spec}`")));
    };
    let one = |t: &str| -> Result<Option<f64>> {
        if t == "-" || t.is_empty() {
            Ok(None)
        } else {
            t.parse().map(Some).map_err(|_| invalid(format!("--periodize: `{t}` is not a number")))
        }
    };
    Ok((one(py)?, one(pz)?))
}

fn output_paths(a: &GenerateArgs, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if let Some(out) = &a.out {
        let parts: Vec<&str> = out.split(',').map(str::trim).collect();
        let [x, y] = parts.as_slice() else {
            return Err(invalid(format!("--out expects two paths `a.xyz,b.xyz`, got `{out}`")));
        };
        return Ok((PathBuf::from(x), PathBuf::from(y)));
    }
    let dir = a.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    Ok((dir.join(format!("{stem}_plus.xyz")), dir.join(format!("{stem}_minus.xyz"))))
}

fn print_certificate(cert: &Certificate) {
    for v in &cert.wl {
        let scope = v.cutoff.map_or("fully connected".to_string(), |c| format!("cutoff {c} Å"));
        println!(
            "  WL {scope}: {} ({} / {} classes)",
            if v.wl_equal { "EQUAL" } else { "DISTINCT" },
            v.classes_plus,
            v.classes_minus
        );
    }
    println!(
        "  angular: {}",
        match cert.angular_first_divergent_iteration {
            Some(k) => format!("DISTINCT at iteration {k}"),
            None => "EQUAL".into(),
        }
    );
    if let Some(s) = &cert.congruence_summary {
        println!("  {s}");
    }
    for f in &cert.failures {
        println!("  failed: {f}");
    }
}

pub fn generate(a: GenerateArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let mut report = RunReport::new(
        argv,
        config_value(ConfigFile {
            generate: Some(a.clone()),
            ..Default::default()
        }),
    );
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join("report.json"));
    let opts = CertifyOptions::default();

    if let Some(name) = &a.catalog {
        let entry = catalog_entry(name).ok_or_else(|| invalid(format!("unknown catalog entry `{name}`")))?;
        let (pa, pb) = output_paths(&a, entry.name)?;
        write_pair(&entry.a, &entry.b, &pa, &pb)?;
        // catalog pairs are graded, not gated: not every entry is meant to be WL-equal
        let mut result = if a.unchecked == Some(true) || !entry.a.is_finite() {
            PairResult {
                label: entry.name.into(),
                ..Default::default()
            }
        } else {
            let cert = certify_finite_pair(&entry.a, &entry.b, &opts)?;
            println!("{}: {}", entry.name, entry.description);
            print_certificate(&cert);
            PairResult::from_certificate(entry.name, &cert)
        };
        result.files = vec![pa.display().to_string(), pb.display().to_string()];
        report.results.push(result);
        return finish_report(report, started, Some(&report_path));
    }

    let params = build_params(&a)?;
    let pair = make_degenerate_pair_unchecked(&params)?;
    let pair = match a.periodize.as_deref() {
        Some(spec) => {
            let (py, pz) = parse_periods(spec)?;
            periodize(&pair, py, pz)?
        }
        None => pair,
    };
    let (plus, minus, cert) = match a.fold {
        Some(repeats) => {
            let (fa, fb) = fold_pair(&pair, repeats)?;
            let cert = (a.unchecked != Some(true)).then(|| certify_finite_pair(&fa, &fb, &opts)).transpose()?;
            (fa, fb, cert)
        }
        None => {
            let cert = (a.unchecked != Some(true)).then(|| certify_periodic_pair(&pair, &opts)).transpose()?;
            (pair.plus.clone(), pair.minus.clone(), cert)
        }
    };
    let (pa, pb) = output_paths(&a, "A")?;
    write_pair(&plus, &minus, &pa, &pb)?;
    println!("wrote {} and {} ({} points each)", pa.display(), pb.display(), plus.len());
    let mut result = match &cert {
        Some(cert) => {
            print_certificate(cert);
            PairResult::from_certificate(&pair.provenance, cert)
        }
        None => PairResult {
            label: pair.provenance.clone(),
            ..Default::default()
        },
    };
    result.files = vec![pa.display().to_string(), pb.display().to_string()];
    report.results.push(result);
    report.payload = serde_json::json!({ "params": params, "manifold_dimension": params.manifold_dimension() });
    finish_report(report, started, Some(&report_path))?;
    match cert {
        Some(c) if !c.passed => Err(Error::CertificationFailed(c.failures.join("; ")).into()),
        Some(_) => {
            println!("certified: WL-equal and distinct");
            Ok(())
        }
        None => Ok(()),
    }
}

fn write_pair(a: &LabeledPointCloud, b: &LabeledPointCloud, pa: &Path, pb: &Path) -> Result<()> {
    for (cloud, path) in [(a, pa), (b, pb)] {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
        write_xyz(path, cloud)?;
    }
    Ok(())
}

pub fn wl_test(a: WlTestArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let [fa, fb] = a.files.as_slice() else {
        return Err(invalid(format!("wl-test needs exactly two structure files, got {}", a.files.len())));
    };
    let ca = read_xyz(fa)?;
    let cb = read_xyz(fb)?;
    let chosen = [a.cutoff.is_some(), a.knn.is_some(), a.full == Some(true)];
    let policy = match chosen {
        [true, false, false] => NeighborhoodPolicy::Cutoff {
            radius: a.cutoff.expect("set"),
        },
        [false, true, false] => NeighborhoodPolicy::KNearest { k: a.knn.expect("set") },
        [false, false, true] => NeighborhoodPolicy::FullyConnected,
        [false, false, false] if ca.is_finite() && cb.is_finite() => NeighborhoodPolicy::FullyConnected,
        [false, false, false] => return Err(invalid("periodic structures need --cutoff or --knn")),
        _ => return Err(invalid("choose only one of --cutoff, --knn, --full")),
    };
    let quantizer = match a.tol {
        Some(tol) => Quantizer::tolerant(tol),
        None => Quantizer::hash_bins(a.bin_width.unwrap_or(DEFAULT_BIN_WIDTH)),
    };
    if a.iters == Some(0) {
        return Err(invalid("--iters must be at least 1"));
    }
    let angular = a.angular == Some(true);
    let (fpa, fpb, cmp) = if angular {
        let (x, y, c) = compare_angular_wl(&ca, &cb, &policy, &quantizer, a.iters)?;
        (x.wl, y.wl, c)
    } else {
        compare_distance_wl(&ca, &cb, &policy, &quantizer, a.iters)?
    };
    let kind = if angular { "angular WL" } else { "distance WL" };
    match cmp.first_divergent_iteration {
        None => println!("EQUAL ({kind}, {} iterations compared)", cmp.iterations_compared),
        Some(k) => println!("DISTINCT at iteration {k} ({kind})"),
    }
    let mut report = RunReport::new(
        argv,
        config_value(ConfigFile {
            wl_test: Some(a.clone()),
            ..Default::default()
        }),
    );
    let verdict = CutoffVerdict {
        cutoff: match policy {
            NeighborhoodPolicy::Cutoff { radius } => Some(radius),
            _ => None,
        },
        wl_equal: cmp.equal,
        first_divergent_iteration: cmp.first_divergent_iteration,
        classes_plus: fpa.final_class_count(),
        classes_minus: fpb.final_class_count(),
    };
    let mut result = PairResult {
        label: format!("{} vs {}", ca.name(), cb.name()),
        files: vec![fa.display().to_string(), fb.display().to_string()],
        ..Default::default()
    };
    if angular {
        result.angular = Some(AngularVerdict {
            distinct: !cmp.equal,
            first_divergent_iteration: cmp.first_divergent_iteration,
        });
    } else {
        result.wl.push(verdict);
    }
    report.results.push(result);
    report.payload = serde_json::json!({ "policy": policy, "quantizer": quantizer, "stamp": fpa.stamp });
    finish_report(report, started, a.report.as_deref())
}

#[derive(Debug, Serialize)]
struct ParamStats {
    name: &'static str,
    min: f64,
    max: f64,
    mean: f64,
}

#[derive(Debug, Serialize)]
struct SampleSummary {
    count: usize,
    seed: u64,
    certified: usize,
    manifold_dimension: usize,
    ranges: ParamRanges,
    statistics: Vec<ParamStats>,
    params: Vec<DegenerateParams>,
}

pub fn sample(a: SampleArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let count = a.count.unwrap_or(10);
    let seed = a.seed.unwrap_or(0);
    let ranges: ParamRanges = match &a.ranges {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => ParamRanges::default(),
    };
    let certify = a.unchecked != Some(true);
    let opts = SampleOptions {
        max_attempts: a.max_attempts.unwrap_or(50),
        certify: certify.then(CertifyOptions::default),
        ..Default::default()
    };
    let params = sample_manifold_with(&ranges, count, seed, &opts)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("samples"));
    let mut report = RunReport::new(
        argv,
        config_value(ConfigFile {
            sample: Some(a.clone()),
            ..Default::default()
        }),
    );
    let mut certified = 0;
    for (i, p) in params.iter().enumerate() {
        let pair = make_degenerate_pair_unchecked(p)?;
        let pa = out.join(format!("pair_{i:04}_plus.xyz"));
        let pb = out.join(format!("pair_{i:04}_minus.xyz"));
        write_pair(&pair.plus, &pair.minus, &pa, &pb)?;
        let mut result = if certify {
            let cert = certify_periodic_pair(&pair, &CertifyOptions::default())?;
            certified += usize::from(cert.passed);
            PairResult::from_certificate(format!("pair_{i:04}"), &cert)
        } else {
            PairResult {
                label: format!("pair_{i:04}"),
                ..Default::default()
            }
        };
        result.files = vec![pa.display().to_string(), pb.display().to_string()];
        report.results.push(result);
    }
    let fields: [(&'static str, fn(&DegenerateParams) -> f64); 7] = [
        ("p", |p| p.p),
        ("c_y", |p| p.c_y),
        ("c_z", |p| p.c_z),
        ("w_y", |p| p.w_y),
        ("w_z", |p| p.w_z),
        ("v_x", |p| p.v_x),
        ("v_y", |p| p.v_y),
    ];
    let statistics = fields
        .iter()
        .map(|(name, get)| {
            let v: Vec<f64> = params.iter().map(get).collect();
            ParamStats {
                name,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: v.iter().sum::<f64>() / v.len() as f64,
            }
        })
        .collect();
    let summary = SampleSummary {
        count,
        seed,
        certified,
        manifold_dimension: ranges.dimension(),
        ranges,
        statistics,
        params,
    };
    write_text(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"),
    )?;
    if certify {
        println!("{certified}/{count} certified");
    } else {
        println!("{count} pairs written (uncertified)");
    }
    report.payload = serde_json::json!({ "certified": certified, "count": count });
    finish_report(report, started, Some(&out.join("report.json")))
}

pub fn appendixb(a: AppendixbArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let trials = a.trials.unwrap_or(1000);
    let seed = a.seed.unwrap_or(0);
    let cert = incompatibility_check(trials, seed)?;
    let ok = if cert.target_residual <= 1e-8 { "yes" } else { "NO" };
    println!(
        "target difference = {TARGET_GAP}·I (residual ≤ 1e-8): {ok} (residual {:e})",
        cert.target_residual
    );
    println!("zeta   = {}", cert.zeta);
    for (k, s) in cert.kappa.iter().enumerate() {
        println!("kappa{} = {s}", k + 1);
    }
    let au = cert.audit;
    println!(
        "surviving terms: f0 {}/{}, f1 {}/{}, f2 {}/{}",
        au.f0_surviving, au.f0_terms, au.f1_surviving, au.f1_terms, au.f2_surviving, au.f2_terms
    );
    println!(
        "{} trials, max |predicted diagonal difference| = {:e}",
        cert.trials, cert.max_abs_predicted_diagonal
    );
    println!("incompatibility certificate: {}", if cert.passed { "PASSED" } else { "FAILED" });
    let mut report = RunReport::new(
        argv,
        config_value(ConfigFile {
            appendixb: Some(a.clone()),
            ..Default::default()
        }),
    );
    let passed = cert.passed;
    report.payload = serde_json::to_value(&cert).expect("serializable");
    finish_report(report, started, a.report.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(Error::CertificationFailed("target difference is not 192·I".into()).into())
    }
}

fn parse_energies(text: &str) -> Result<Vec<EnergyPair>> {
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::Parse {
                    line: k + 1,
                    message: format!("expected two energies, found `{line}`"),
                }
            })?;
        let [ep, em] = v.as_slice() else {
            return Err(Error::Parse {
                line: k + 1,
                message: format!("expected two energies, found {}", v.len()),
            }
            .into());
        };
        pairs.push(EnergyPair::new(*ep, *em));
    }
    Ok(pairs)
}

pub fn floor(a: FloorArgs, argv: Vec<String>) -> Result<()> {
    let started = Instant::now();
    let path = a.energies.clone().ok_or_else(|| invalid("--energies is required"))?;
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let pairs = parse_energies(&text)?;
    let value = error_floor(&pairs)?;
    println!(
        "error floor = {value:.3} eV  [sqrt(mean(((E+ - E-)/2)^2)) over {} pairs, {} structures]",
        pairs.len(),
        2 * pairs.len()
    );
    let mut report = RunReport::new(
        argv,
        config_value(ConfigFile {
            floor: Some(a.clone()),
            ..Default::default()
        }),
    );
    report.payload = serde_json::json!({ "error_floor_ev": value, "pairs": pairs });
    finish_report(report, started, a.report.as_deref())
}
