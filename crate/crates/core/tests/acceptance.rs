//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.
//!
//! `cargo test -p pixlens-core --test acceptance`

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use pixlens::disentangle::{
    analyze, build_prompt_grid, build_zdiff_dataset, train_linear_classifier, ClassifierConfig, DisentangleConfig,
    LatentArchive, DEFAULT_CLASS_CAP,
};
use pixlens::evaluators::vocab::{direction_unit_vector, DirectionVector, SizeDirection};
use pixlens::evaluators::{
    angular_score, eval_object_removal, eval_positional_addition, eval_size_change, EvalParams, SizeParams,
};
use pixlens::model::{decode_rle, encode_rle, BinaryMask, DetectionSet, EditType};
use pixlens::pipeline::{render_report, run_evaluation, summarize, Format, RunConfig, RunInputs};
use pixlens::preservation::{background_preservation, subject_preservation, PreservationContext};
use pixlens::vision::{
    self, aligned_iou, histogram_correlation, intersection_area, mask_area, mask_centroid, masked_histograms,
    sift_match_score, ssim, GrayImage, RgbImage,
};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn evaluator_exactness() -> Outcome {
    let (w, h) = (64, 64);
    let mut removal_cases = 0;
    for ni in 1..=10u32 {
        for ne in 0..=10u32 {
            let set = |n: u32| {
                let mut s = DetectionSet::new("i", w, h);
                for k in 0..n {
                    s.detections.push(det("dog", 0.5, rect(w, h, 5 * k, 0, 5 * k + 2, 2)));
                }
                s
            };
            let got = eval_object_removal(&set(ni), &set(ne), "dog", 0.1)
                .map_err(|e| e.to_string())?
                .score;
            let want = f64::max(1.0 - ne as f64 / ni as f64, 0.0);
            check((got - want).abs() <= 1e-12, || {
                format!("removal ni={ni} ne={ne}: {got} vs {want}")
            })?;
            removal_cases += 1;
        }
    }

    let mut alpha_cases = 0;
    for k in 0..=12 {
        let alpha = 15.0 * k as f64;
        for base in [0.0f64, 33.0, 90.0, 200.0] {
            let intended = DirectionVector::new(base.to_radians().cos(), base.to_radians().sin()).unwrap();
            let t = (base + alpha).to_radians();
            let actual = DirectionVector::new(t.cos(), t.sin()).unwrap();
            let got = angular_score(actual, intended);
            let want = f64::max(0.0, (90.0 - alpha) / 90.0);
            check((got - want).abs() <= 1e-9, || {
                format!("alpha={alpha} base={base}: {got} vs {want}")
            })?;
            alpha_cases += 1;
        }
    }
    // the full evaluator on exact compass displacements
    let params = EvalParams::default();
    let keywords = [
        "right",
        "top right",
        "above",
        "top left",
        "left",
        "bottom left",
        "below",
        "bottom right",
    ];
    let anchor = rect(w, h, 28, 28, 35, 35);
    let input = DetectionSet::new("i", w, h).with(det("table", 0.9, anchor.clone()));
    let (ax, ay) = brute_centroid(&anchor).unwrap();
    for (i, _) in keywords.iter().enumerate() {
        let t = (45.0 * i as f64).to_radians();
        let (dx, dy) = ((t.cos() * 20.0).round() as i64, -(t.sin() * 20.0).round() as i64);
        let x0 = (28 + dx) as u32;
        let y0 = (28 + dy) as u32;
        let added = rect(w, h, x0, y0, x0 + 3, y0 + 3);
        let edited = DetectionSet::new("e", w, h)
            .with(det("table", 0.9, anchor.clone()))
            .with(det("cup", 0.9, added.clone()));
        let (bx, by) = brute_centroid(&added).unwrap();
        for kw in keywords {
            let v = direction_unit_vector(kw).unwrap();
            let alpha = angle_between(bx - ax, by - ay, v.dx, v.dy);
            let want = f64::max(0.0, (90.0 - alpha) / 90.0);
            let got = eval_positional_addition(&input, &edited, "table", &format!("cup {kw}"), &params)
                .map_err(|e| e.to_string())?
                .score;
            check((got - want).abs() <= 1e-9, || {
                format!("positional `{kw}` offset {i}: {got} vs {want}")
            })?;
            alpha_cases += 1;
        }
    }

    let mut r = rng(42);
    let sp = SizeParams::default();
    let mut gate_hits = [0usize; 2];
    for case in 0..20 {
        let cx = r.random_range(24.0..40.0);
        let cy = r.random_range(24.0..40.0);
        let r0 = r.random_range(6.0..12.0);
        let scale: f64 = [0.7, 0.85, 0.93, 0.97, 1.0, 1.05, 1.08, 1.12, 1.3, 1.6][case % 10];
        let shift = if case % 3 == 0 { r.random_range(0.0..6.0) } else { 0.0 };
        let m0 = disc(w, h, cx, cy, r0);
        let m1 = disc(w, h, cx + shift, cy, r0 * scale.sqrt());
        let dir = if case % 2 == 0 {
            SizeDirection::Big
        } else {
            SizeDirection::Small
        };
        let input = DetectionSet::new("i", w, h).with(det("ball", 0.9, m0.clone()));
        let edited = DetectionSet::new("e", w, h).with(det("ball", 0.9, m1.clone()));
        let got = eval_size_change(&input, &edited, "ball", dir, sp, 0.1)
            .map_err(|e| e.to_string())?
            .score;
        let (a0, a1) = (brute_area(&m0) as f64, brute_area(&m1) as f64);
        let ratio = a1 / a0;
        let gate = match dir {
            SizeDirection::Big => ratio > 1.0 + sp.delta,
            SizeDirection::Small => ratio < 1.0 - sp.delta,
        };
        let contained = brute_intersection(&m0, &m1) as f64 / a0.min(a1) > sp.containment;
        let want = if gate && contained { 1.0 } else { 0.0 };
        gate_hits[want as usize] += 1;
        check(got == want, || {
            format!("size case {case}: ratio {ratio:.4} got {got} want {want}")
        })?;
    }
    check(gate_hits[0] > 0 && gate_hits[1] > 0, || {
        format!("size cases not mixed: {gate_hits:?}")
    })?;
    Ok(format!(
        "{removal_cases} removal cases, {alpha_cases} angular cases, 20 size gates ({} pass)",
        gate_hits[1]
    ))
}

fn geometry_oracles() -> Outcome {
    let geom = |a: &BinaryMask, b: &BinaryMask| -> Result<(), String> {
        check(mask_area(a) == brute_area(a), || "area".into())?;
        match (mask_centroid(a), brute_centroid(a)) {
            (Ok((x, y)), Some((ox, oy))) => {
                check((x - ox).abs() < 1e-12 && (y - oy).abs() < 1e-12, || "centroid".into())?
            }
            (Err(_), None) => {}
            (c, o) => return Err(format!("centroid {c:?} vs {o:?}")),
        }
        let inter = intersection_area(a, b).map_err(|e| e.to_string())?;
        check(inter == brute_intersection(a, b), || "intersection".into())?;
        match (aligned_iou(a, b), brute_aligned_iou(a, b)) {
            (Ok(v), Some(o)) => check((v - o).abs() < 1e-12, || format!("aligned iou {v} vs {o}")),
            (Err(_), None) => Ok(()),
            (v, o) => Err(format!("aligned iou {v:?} vs {o:?}")),
        }
    };
    let all3: Vec<BinaryMask> = (0..512u32)
        .map(|bits| BinaryMask::from_fn(3, 3, |x, y| bits >> (y * 3 + x) & 1 == 1))
        .collect();
    let mut pairs = 0;
    for a in &all3 {
        for b in &all3 {
            geom(a, b)?;
            pairs += 1;
        }
    }
    let mut r = rng(7);
    let rand16: Vec<BinaryMask> = (0..200)
        .map(|i| random_mask(16, 16, [0.05, 0.2, 0.5, 0.8][i % 4], &mut r))
        .collect();
    for a in &rand16 {
        for b in &rand16 {
            geom(a, b)?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} mask pairs (512 3x3, 200 16x16)"))
}

fn ssim_oracle(a: &GrayImage, b: &GrayImage) -> f64 {
    let n = 64.0;
    let (ma, mb) = (a.data().iter().sum::<f64>() / n, b.data().iter().sum::<f64>() / n);
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
        cov += (x - ma) * (y - mb);
    }
    let (va, vb, cov) = (va / (n - 1.0), vb / (n - 1.0), cov / (n - 1.0));
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

fn similarity_metrics() -> Outcome {
    let tex = textured(96, 96, 3).to_gray();
    let s = ssim(&tex, &tex).map_err(|e| e.to_string())?;
    check((s - 1.0).abs() <= 1e-9, || format!("ssim(x,x) = {s}"))?;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let a = noise_gray(8, 8, 100 + seed);
        let b = GrayImage::from_fn(8, 8, |x, y| {
            0.6 * a.get(x, y) + 0.4 * noise_gray(8, 8, 200 + seed).get(x, y)
        });
        for (p, q) in [(&a, &b), (&b, &a), (&a, &a)] {
            let got = ssim(p, q).map_err(|e| e.to_string())?;
            worst = worst.max((got - ssim_oracle(p, q)).abs());
        }
    }
    check(worst <= 1e-6, || format!("ssim oracle error {worst:e}"))?;

    let self_match = sift_match_score(&tex, &tex, None, None).map_err(|e| e.to_string())?;
    check(self_match >= 0.9, || format!("sift self-match {self_match}"))?;
    let mut cross = 0.0f64;
    for seed in 0..3 {
        let v = sift_match_score(
            &noise_gray(128, 128, seed),
            &noise_gray(128, 128, 1000 + seed),
            None,
            None,
        )
        .map_err(|e| e.to_string())?;
        cross = cross.max(v);
    }
    check(cross < 0.075, || format!("sift noise match {cross}"))?;

    let img = textured(40, 40, 5);
    let m = disc(40, 40, 20.0, 20.0, 12.0);
    let hist = masked_histograms(&img, &m, vision::DEFAULT_SIGMA).map_err(|e| e.to_string())?;
    let c = histogram_correlation(&hist, &hist);
    check(c == 1.0, || format!("histogram self-correlation {c}"))?;
    Ok(format!(
        "ssim oracle max err {worst:.1e}, sift self {self_match:.3}, sift noise max {cross:.4}"
    ))
}

fn preservation_ordering() -> Outcome {
    let (w, h) = (96, 96);
    let background = quantized(&textured(w, h, 21));
    let subject = rect(w, h, 30, 30, 65, 65);
    let subject_tex = textured(w, h, 22);
    let input = quantized(&composite(&background, &subject, &subject_tex));

    // good: a small object added away from the subject, nothing else touched
    let added = rect(w, h, 80, 8, 88, 16);
    let good = quantized(&composite(&input, &added, &RgbImage::solid(w, h, [30, 200, 30])));
    // bad: subject squashed, shifted and recoloured, background disturbed
    let moved = rect(w, h, 40, 44, 85, 69);
    let mut r = rng(23);
    let noisy = RgbImage::from_fn(w, h, |x, y| {
        let n = r.random_range(-0.2..0.2);
        background.get(x, y).map(|v| v + n)
    });
    let other_tex = textured(w, h, 24);
    let recoloured = RgbImage::from_fn(w, h, |x, y| {
        let p = other_tex.get(x, y);
        [1.0 - p[0], p[2], 0.5 * p[1]]
    });
    let bad = quantized(&composite(&noisy, &moved, &recoloured));

    let scores = |edited: &RgbImage, subj: &BinaryMask, extra: &BinaryMask| {
        let ctx = PreservationContext {
            input: &input,
            edited,
            subject_input: &subject,
            subject_edited: subj,
            edit_type: EditType::ObjectAddition,
            histogram_sigma: vision::DEFAULT_SIGMA,
        };
        let s = subject_preservation(&ctx).map_err(|e| e.to_string())?;
        let b = background_preservation(&input, edited, &[&subject, subj, extra]).map_err(|e| e.to_string())?;
        Ok::<_, String>((s, b))
    };
    let (g, gb) = scores(&good, &subject, &added)?;
    let (b, bb) = scores(&bad, &moved, &added)?;
    let gc = g.color_similarity.unwrap_or(f64::NAN);
    let bc = b.color_similarity.unwrap_or(f64::NAN);
    let ordered = [
        ("sift", g.sift > b.sift),
        ("aligned_iou", g.aligned_iou > b.aligned_iou),
        ("ssim", g.ssim > b.ssim),
        ("color", gc > bc),
        ("position", g.position < b.position),
        ("background", gb > bb),
    ];
    for (name, ok) in ordered {
        check(ok, || format!("{name} not ordered: good {g:?}/{gb} bad {b:?}/{bb}"))?;
    }

    let ctx = PreservationContext {
        input: &input,
        edited: &input,
        subject_input: &subject,
        subject_edited: &subject,
        edit_type: EditType::SizeChange,
        histogram_sigma: vision::DEFAULT_SIGMA,
    };
    let id = subject_preservation(&ctx).map_err(|e| e.to_string())?;
    let idb = background_preservation(&input, &input, &[&subject]).map_err(|e| e.to_string())?;
    check(
        id.aligned_iou == 1.0 && (id.ssim - 1.0).abs() <= 1e-9 && id.position == 0.0 && idb == 1.0,
        || format!("identity edit {id:?} background {idb}"),
    )?;
    Ok(format!(
        "good sift {:.3}/iou {:.3}/ssim {:.3}/color {:.3}/pos {:.4}/bg {:.3} vs bad {:.3}/{:.3}/{:.3}/{:.3}/{:.4}/{:.3}",
        g.sift, g.aligned_iou, g.ssim, gc, g.position, gb, b.sift, b.aligned_iou, b.ssim, bc, b.position, bb
    ))
}

fn disentanglement() -> Outcome {
    let grid = build_prompt_grid();
    let cfg = DisentangleConfig::default();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    latents::compositional(12, 1)
        .write(dir.path())
        .map_err(|e| e.to_string())?;
    let comp = LatentArchive::load(dir.path()).map_err(|e| e.to_string())?;
    let rep = analyze(&comp, &grid, &cfg).map_err(|e| e.to_string())?;
    let intra_max = rep
        .intra_sample
        .per_category
        .values()
        .fold(rep.intra_sample.overall, |m, v| m.max(v.abs()));
    check(intra_max <= 1e-6, || format!("compositional intra {intra_max}"))?;
    let inter = rep.inter_sample.overall;
    check(inter >= 0.99, || format!("compositional inter {inter}"))?;

    let block = latents::block_disentangled(4, 2);
    let run = || analyze(&block, &grid, &cfg).map(|r| serde_json::to_vec(&r).expect("serializes"));
    let first = run().map_err(|e| e.to_string())?;
    let second = run().map_err(|e| e.to_string())?;
    check(first == second, || "block analysis not byte-identical".into())?;
    let rep = analyze(&block, &grid, &cfg).map_err(|e| e.to_string())?;
    let ba = rep.inter_attribute.balanced_accuracy;
    check(ba >= 0.95, || format!("block balanced accuracy {ba}"))?;

    let ds = build_zdiff_dataset(&block, &grid, DEFAULT_CLASS_CAP, 0);
    let xs: Vec<Vec<f64>> = ds.examples.iter().map(|e| e.features.clone()).collect();
    let mut ys: Vec<usize> = ds.examples.iter().map(|e| e.label.index()).collect();
    ys.shuffle(&mut rng(99));
    let (_, shuffled) = train_linear_classifier(&xs, &ys, &ClassifierConfig::default()).map_err(|e| e.to_string())?;
    let sba = shuffled.balanced_accuracy;
    check((sba - 0.25).abs() <= 0.10, || {
        format!("shuffled balanced accuracy {sba}")
    })?;
    Ok(format!(
        "intra max {intra_max:.1e}, inter {inter:.4}, block BA {ba:.4} ({} test), shuffled BA {sba:.4}",
        rep.inter_attribute.test_size
    ))
}

fn pipeline_determinism() -> Outcome {
    let f = fixture_suite();
    let inputs = RunInputs {
        images_dir: &f.images_dir,
        edited_dir: &f.edited_dir,
        detections_input: &f.detections_input,
        detections_edited: &f.detections_edited,
    };
    let run = |workers| {
        let cfg = RunConfig {
            workers,
            model: Some("fixture".into()),
            ..RunConfig::default()
        };
        run_evaluation(&f.dataset, &inputs, &cfg).map_err(|e| e.to_string())
    };
    let one = run(1)?;
    let eight = run(8)?;
    for fmt in [Format::Json, Format::Markdown, Format::Csv] {
        check(render_report(&one, fmt) == render_report(&eight, fmt), || {
            format!("{fmt:?} differs 1 vs 8")
        })?;
    }
    for r in &one.records {
        let want = f.expected[&r.edit_id];
        check(r.evaluation_success && (r.edit_specific - want).abs() <= 1e-12, || {
            format!("{}: {} vs oracle {want}", r.edit_id, r.edit_specific)
        })?;
    }
    let again = summarize(&one.records);
    let mut worst = 0.0f64;
    for (t, g) in &one.summary.per_edit_type {
        let recs: Vec<f64> = one
            .records
            .iter()
            .filter(|r| r.edit_type == *t && r.evaluation_success)
            .map(|r| r.edit_specific)
            .collect();
        let direct = recs.iter().sum::<f64>() / recs.len() as f64;
        worst = worst.max((g.edit_specific.unwrap() - direct).abs());
        worst = worst.max((again.per_edit_type[t].edit_specific.unwrap() - direct).abs());
    }
    check(worst <= 1e-12, || format!("aggregate drift {worst:e}"))?;

    let md = String::from_utf8(render_report(&one, Format::Markdown)).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
    check(
        lines
            .first()
            .is_some_and(|l| l.starts_with("| Edit Type | N | Failed | Edit-Specific |")),
        || format!("header: {:?}", lines.first()),
    )?;
    let labels: Vec<&str> = lines[2..]
        .iter()
        .map(|l| l.split('|').nth(1).unwrap_or("").trim())
        .collect();
    let mut want: Vec<&str> = EditType::ALL.iter().map(|t| t.title()).collect();
    want.push("Avg.");
    check(labels == want, || format!("markdown rows {labels:?}"))?;
    Ok(format!(
        "6 edits, {} report bytes identical at 1/8 workers",
        render_report(&one, Format::Json).len()
    ))
}

fn rle_codec() -> Outcome {
    for bits in 0..512u32 {
        let m = BinaryMask::from_fn(3, 3, |x, y| bits >> (y * 3 + x) & 1 == 1);
        let counts = encode_rle(&m);
        let back = decode_rle(&counts, 3, 3).map_err(|e| e.to_string())?;
        check(back == m, || format!("3x3 mask {bits:09b}"))?;
        check(counts.iter().sum::<i64>() == 9, || format!("3x3 counts {counts:?}"))?;
    }
    let mut r = rng(64);
    for case in 0..1000 {
        let p = [0.0, 0.01, 0.3, 0.5, 0.9, 1.0][case % 6];
        let m = if case % 7 == 0 {
            disc(
                64,
                64,
                r.random_range(0.0..64.0),
                r.random_range(0.0..64.0),
                r.random_range(1.0..30.0),
            )
        } else {
            random_mask(64, 64, p, &mut r)
        };
        let counts = encode_rle(&m);
        let back = decode_rle(&counts, 64, 64).map_err(|e| e.to_string())?;
        check(back == m, || format!("64x64 case {case}"))?;
        check(encode_rle(&back) == counts, || {
            format!("64x64 case {case} not canonical")
        })?;
    }
    Ok("512 exhaustive 3x3, 1000 random 64x64".into())
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("evaluator exactness", evaluator_exactness, Some(Duration::from_secs(5))),
        ("geometry oracles", geometry_oracles, Some(Duration::from_secs(10))),
        ("ssim/sift/histogram", similarity_metrics, Some(Duration::from_secs(30))),
        (
            "preservation ordering",
            preservation_ordering,
            Some(Duration::from_secs(10)),
        ),
        ("disentanglement", disentanglement, Some(Duration::from_secs(60))),
        ("pipeline determinism", pipeline_determinism, None),
        ("rle codec", rle_codec, None),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {took:.2?}, budget {b:.0?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {:>8.2?}  {detail}", took),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {:>8.2?}  {why}", took);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
