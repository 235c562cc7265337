mod common;

use common::{build_sequence, frame_ops, structure};
use proptest::prelude::*;
use ssu_core::color::Rgba;
use ssu_core::raster::{rasterize, render_frames, ssim, Framebuffer};
use ssu_core::reward::{
    clipped_objective, grpo_advantages, ADVANTAGE_EPSILON, grpo_loss, hybrid_reward, kl_term, Candidate, GrpoConfig, RewardReport,
    RewardTask, RewardWeights, StubScorer,
};
use ssu_core::ssu::{emit_stream, extract, TokenStream};
use ssu_core::svg::{parse_svg, SvgDocument};
use ssu_core::validate::check_cot;

fn rewards() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-3.0f64..3.0, 2..16), -7i32..3)
        .prop_map(|(r, exp)| r.into_iter().map(|x| x * 10f64.powi(exp)).collect::<Vec<_>>())
        .prop_filter("spread above the advantage floor", |r: &Vec<f64>| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt() >= ADVANTAGE_EPSILON
        })
}

fn image() -> impl Strategy<Value = Framebuffer> {
    (11u32..24, 11u32..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h * 4) as usize).prop_map(move |mut pixels| {
            pixels.chunks_mut(4).for_each(|p| p[3] = 255);
            Framebuffer { width: w, height: h, pixels }
        })
    })
}

fn candidate(new: f64, old: f64, total: f64) -> Candidate {
    Candidate {
        stream: TokenStream(String::new()),
        logprob_new: vec![new],
        logprob_old: vec![old],
        reward: RewardReport { total, ..RewardReport::new(0.0, 1, RewardWeights::default(), None) },
    }
}

fn shapes_doc(rects: &[(i32, i32, i32, i32, &str)], dx: i32, dy: i32) -> SvgDocument {
    let mut body = String::new();
    for (i, (x, y, w, h, fill)) in rects.iter().enumerate() {
        body += &format!(
            r#"<path id="{i}" d="M{},{} l{w},0 l0,{h} l{},{} z" fill="{fill}" opacity="0.75"/>"#,
            x + dx,
            y + dy,
            -w / 2,
            -h / 3,
        );
    }
    parse_svg(&format!(r#"<svg width="64" height="64">{body}</svg>"#)).unwrap()
}

fn rect_list() -> impl Strategy<Value = Vec<(i32, i32, i32, i32, &'static str)>> {
    prop::collection::vec(
        (8i32..30, 8i32..30, 1i32..20, 1i32..20, prop::sample::select(vec!["red", "#2a9d8f", "navy", "#ffaa00"])),
        1..5,
    )
}

proptest! {
    #[test]
    fn advantages_are_standardized(r in rewards()) {
        let a = grpo_advantages(&r).unwrap();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((std - 1.0).abs() < 1e-9, "std {}", std);
    }

    #[test]
    fn sub_floor_spread_shrinks_advantages(r in rewards(), k in 1.0f64..100.0) {
        let tiny: Vec<f64> = r.iter().map(|x| x * 1e-9 / k).collect();
        let a = grpo_advantages(&tiny).unwrap();
        prop_assert!(a.iter().all(|x| x.abs() <= (r.len() as f64).sqrt()));
    }

    #[test]
    fn advantages_ignore_reward_shift(r in rewards(), c in -10.0f64..10.0) {
        let a = grpo_advantages(&r).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
        let b = grpo_advantages(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn equal_rewards_give_zero_advantages(v in -5.0f64..5.0, n in 2usize..12) {
        prop_assert!(grpo_advantages(&vec![v; n]).unwrap().iter().all(|a| *a == 0.0));
    }

    #[test]
    fn clipping_bounds_the_objective(log_rho in (0.01f64).ln()..(100.0f64).ln(), a in -5.0f64..5.0, eps in 0.05f64..0.5) {
        let rho = log_rho.exp();
        let s = clipped_objective(rho, a, eps);
        prop_assert!(s <= rho * a + 1e-12);
        prop_assert!(s <= rho.clamp(1.0 - eps, 1.0 + eps) * a + 1e-12);
        if a >= 0.0 {
            prop_assert!(s <= (1.0 + eps) * a + 1e-12);
        } else {
            prop_assert!(s <= (1.0 - eps) * a + 1e-12);
        }
        prop_assert!(kl_term(rho) >= 0.0);
    }

    #[test]
    fn loss_decomposes(
        group in prop::collection::vec((-3.0f64..0.0, -3.0f64..0.0, -2.0f64..2.0), 2..10),
        beta in 0.0f64..0.5,
    ) {
        let cands: Vec<Candidate> = group.iter().map(|&(n, o, r)| candidate(n, o, r)).collect();
        let rewards: Vec<f64> = group.iter().map(|g| g.2).collect();
        let adv = grpo_advantages(&rewards).unwrap();
        let cfg = GrpoConfig { clip_epsilon: 0.2, beta_kl: beta };
        let terms = grpo_loss(&cands, &adv, cfg).unwrap();
        let n = cands.len() as f64;
        let sur = cands.iter().zip(&adv).map(|(c, a)| clipped_objective(c.ratio(), *a, 0.2)).sum::<f64>() / n;
        let kl = cands.iter().map(|c| kl_term(c.ratio())).sum::<f64>() / n;
        prop_assert!((terms.surrogate - sur).abs() < 1e-12);
        prop_assert!((terms.kl_estimate - kl).abs() < 1e-12);
        prop_assert!((terms.loss - (-sur + beta * kl)).abs() < 1e-12);
        prop_assert!(terms.kl_estimate >= 0.0);
    }

    #[test]
    fn reward_is_linear_in_weights(la in 0.0f64..3.0, lf in 0.0f64..3.0, valid in any::<bool>()) {
        let s0 = parse_svg(
            r#"<svg width="40" height="40"><rect id="0" width="10" height="10" fill="red"/></svg>"#,
        ).unwrap();
        let task = RewardTask { prompt: "red square", s0: &s0, frames: 1, description: Some("a red square fades") };
        let stream = if valid { "<|time=1|>\n  <|ID=0|> fill: blue\n" } else { "<|time=1|>\n  <|ID=4|> fill: blue\n" };
        let w = RewardWeights { lambda_align: la, lambda_fmt: lf };
        let r = hybrid_reward(&task, stream, w, &StubScorer).unwrap();
        prop_assert_eq!(r.r_fmt, if valid { 1 } else { -1 });
        let expected_align = match (valid, la == 0.0) {
            (false, _) => -1.0,
            (true, true) => 0.0,
            (true, false) => StubScorer::score_text("red square", "a red square fades"),
        };
        prop_assert_eq!(r.r_align, expected_align);
        prop_assert!((r.total - (la * r.r_align + lf * f64::from(r.r_fmt))).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in image(), seed in any::<u64>()) {
        let mut b = a.clone();
        let mut s = seed;
        for p in b.pixels.chunks_mut(4) {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            if s >> 62 == 0 {
                p[(s >> 40) as usize % 3] = (s >> 16) as u8;
            }
        }
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn cot_acceptance_is_monotone(ids in prop::collection::vec(0u64..12, 1..6), extra in 0u64..12) {
        let s0 = parse_svg(
            r#"<svg width="10" height="10"><g id="0"><rect id="1"/><rect id="2"/><circle id="3" r="1"/></g><path id="5" d="M0,0 l1,1"/></svg>"#,
        ).unwrap();
        let text: String = ids.iter().map(|i| format!("move id {i} next. ")).collect();
        let base = check_cot(&text, &s0);
        let more = check_cot(&format!("{text} then ID=\"{extra:03}\""), &s0);
        // Mentioning one more id never turns a rejection into acceptance.
        if !base.accepted {
            prop_assert!(!more.accepted);
        }
        prop_assert_eq!(more.accepted, base.accepted && s0.contains_id(ssu_core::svg::NodeId(extra as u32)));
        prop_assert!(more.referenced_ids.starts_with(&base.referenced_ids));
    }

    #[test]
    fn rasterizing_is_deterministic_across_pools(groups in structure(), ops in frame_ops(3)) {
        let seq = build_sequence(&groups, &ops);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| render_frames(seq.frames(), (96, 96), Rgba::WHITE)).unwrap();
        let b = four.install(|| render_frames(seq.frames(), (96, 96), Rgba::WHITE)).unwrap();
        prop_assert_eq!(a, b);
        let u = extract(&seq).unwrap();
        prop_assert!(!emit_stream(&u).0.contains("\r"));
    }

    #[test]
    fn integer_translation_shifts_pixels(rects in rect_list(), dx in -6i32..7, dy in -6i32..7) {
        let a = rasterize(&shapes_doc(&rects, 0, 0), (64, 64), Rgba::WHITE).unwrap();
        let b = rasterize(&shapes_doc(&rects, dx, dy), (64, 64), Rgba::WHITE).unwrap();
        for y in 0..64i32 {
            for x in 0..64i32 {
                let (u, v) = (x + dx, y + dy);
                if (0..64).contains(&u) && (0..64).contains(&v) {
                    prop_assert_eq!(a.pixel(x as u32, y as u32), b.pixel(u as u32, v as u32));
                }
            }
        }
    }

    #[test]
    fn later_siblings_paint_over_earlier(x in 0i32..40, y in 0i32..40, w in 4i32..20, h in 4i32..20) {
        let doc = parse_svg(&format!(
            r#"<svg width="64" height="64"><rect id="0" x="{x}" y="{y}" width="{w}" height="{h}" fill="red"/><rect id="1" x="{x}" y="{y}" width="{w}" height="{h}" fill="blue"/></svg>"#,
        )).unwrap();
        let fb = rasterize(&doc, (64, 64), Rgba::WHITE).unwrap();
        prop_assert_eq!(fb.pixel((x + 1) as u32, (y + 1) as u32), [0, 0, 255, 255]);
        prop_assert_eq!(fb.pixel((x + w - 1) as u32, (y + h - 1) as u32), [0, 0, 255, 255]);
    }
}
