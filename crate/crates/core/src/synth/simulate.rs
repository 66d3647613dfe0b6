use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};

use super::catalog::SyntheticProduct;
use super::queries::QueryIntent;
use super::spec::{SimulationSpec, UserModel};
use super::utility::{social_proof, title_utility, true_utility};
use crate::dataset::EngagementRecord;
use crate::features::{Bm25fIndex, Bm25fParams};

/// Mixes a stream index into a master seed (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Top `depth` catalog indices by BM25F score, ties broken by doc id. Only
/// documents sharing a term with the query are retrieved.
pub fn retrieve(
    index: &Bm25fIndex,
    catalog: &[SyntheticProduct],
    query: &QueryIntent,
    params: &Bm25fParams,
    depth: usize,
) -> Vec<(usize, f64)> {
    let mut scored = index.score_all(&query.text, params);
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| catalog[a.0].doc_id.cmp(&catalog[b.0].doc_id))
    });
    scored.truncate(depth);
    scored
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0)).expect("valid binomial").sample(rng)
}

/// Plays every query's sessions against its retrieved candidates and returns
/// one aggregated record per (query, candidate), queries in input order and
/// candidates in retrieval order.
///
/// Sessions are split across `display_versions` rankings, each the retrieval
/// score perturbed by log-normal noise. A session sees page 1 and moves on to
/// each further page with `continue_probability`; every result on a seen page
/// gets an impression. Clicks depend on title utility, rank and a per-pair
/// noise factor; add-to-carts on page utility and social proof, orders on
/// page utility.
pub fn simulate_sessions(
    catalog: &[SyntheticProduct],
    queries: &[QueryIntent],
    user: &UserModel,
    spec: &SimulationSpec,
    seed: u64,
) -> Vec<EngagementRecord> {
    let index = Bm25fIndex::new(catalog.iter().map(|p| &p.text_fields));
    let params = Bm25fParams::default();
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut out = Vec::new();
    for q in queries {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, q.query_id.0));
        let candidates = retrieve(&index, catalog, q, &params, spec.retrieval_depth);
        let n = candidates.len();
        let sigma = user.noise_sigma;
        let noise: Vec<f64> = (0..n)
            .map(|_| (sigma * normal.sample(&mut rng) - 0.5 * sigma * sigma).exp())
            .collect();
        let proof: Vec<f64> = candidates.iter().map(|&(i, _)| social_proof(&catalog[i], user)).collect();
        let click_p: Vec<f64> = candidates
            .iter()
            .zip(&noise)
            .zip(&proof)
            .map(|((&(i, _), z), sp)| user.click_base * title_utility(q, &catalog[i], user) * sp * z)
            .collect();
        let page_u: Vec<f64> = candidates.iter().map(|&(i, _)| true_utility(q, &catalog[i], user)).collect();

        let mut imp = vec![0u64; n];
        let mut top2 = vec![0u64; n];
        let mut clicks = vec![0u64; n];
        let mut atc = vec![0u64; n];
        let mut orders = vec![0u64; n];
        let mut remaining = q.sessions;
        let versions = spec.display_versions as u64;
        for v in 0..versions {
            let share = binomial(remaining, 1.0 / (versions - v) as f64, &mut rng);
            remaining -= share;
            let mut order: Vec<(usize, f64)> = candidates
                .iter()
                .enumerate()
                .map(|(slot, &(_, s))| (slot, s * (spec.display_noise * normal.sample(&mut rng)).exp()))
                .collect();
            order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
            let pages = n.div_ceil(spec.page_size);
            let mut views = Vec::with_capacity(pages);
            let mut seen = share;
            for p in 0..pages {
                if p > 0 {
                    seen = binomial(seen, spec.continue_probability, &mut rng);
                }
                views.push(seen);
            }
            for (pos, &(slot, _)) in order.iter().enumerate() {
                let shown = views[pos / spec.page_size];
                if shown == 0 {
                    continue;
                }
                let rank = (pos + 1) as f64;
                imp[slot] += shown;
                if pos < 2 {
                    top2[slot] += shown;
                }
                let p_click = (click_p[slot] * rank.powf(-user.position_bias_exponent)).clamp(0.0, 1.0);
                let c = binomial(shown, p_click, &mut rng);
                let a = binomial(c, user.atc_base * page_u[slot] * proof[slot], &mut rng);
                let o = binomial(a, user.order_base * page_u[slot], &mut rng);
                clicks[slot] += c;
                atc[slot] += a;
                orders[slot] += o;
            }
        }
        for (slot, &(i, _)) in candidates.iter().enumerate() {
            let product = &catalog[i];
            out.push(EngagementRecord {
                query_id: q.query_id,
                doc_id: product.doc_id.clone(),
                impressions: imp[slot],
                impressions_top2: top2[slot],
                clicks: clicks[slot],
                atc: atc[slot],
                orders: orders[slot],
                revenue: product.price * orders[slot] as f64,
            });
        }
    }
    out
}
