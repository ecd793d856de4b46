//! Ranking prompt for an optional multimodal-model backend.
//!
//! The model's answer is advisory: the rule-based score stays authoritative and
//! [`parse_ranking_reply`] only checks that the reply is a strict ranking.

use std::fmt::Write as _;

use super::{poi_distance, DynamicContext, LandingSite, PoiRecord, RankerError, RegulatoryConfig};

/// Site label used in the prompt: `S1`, `S2`, ... in input order.
fn site_label(i: usize) -> String {
    format!("S{}", i + 1)
}

/// Assembles the four context streams (visual evidence, POI proximity,
/// dynamic context, regulatory constraints) into one ranking request.
pub fn build_ranking_prompt(
    sites: &[LandingSite],
    pois: &[PoiRecord],
    ctx: &DynamicContext,
    reg: &RegulatoryConfig,
) -> Result<String, RankerError> {
    if sites.is_empty() {
        return Err(RankerError::EmptyInput);
    }
    let mut p = String::new();
    p.push_str(
        "You are assisting a UAV emergency landing decision. Rank the candidate landing sites below \
         from safest to least safe using all four information sections.\n\n",
    );

    p.push_str("## Visual Evidence\n");
    for (i, s) in sites.iter().enumerate() {
        let b = s.candidate.bbox;
        let _ = writeln!(
            p,
            "- {}: patch {} (pixels x {}..{}, y {}..{}), surface: {}; visual check: {} ({})",
            site_label(i),
            s.candidate.id(),
            b.x0,
            b.x1,
            b.y0,
            b.y1,
            s.surface,
            s.verdict.label,
            s.verdict.reason.trim()
        );
    }

    p.push_str("\n## Spatial Context (POI)\n");
    p.push_str("| site | category | name | distance_m | active now |\n|---|---|---|---|---|\n");
    let mut rows = 0;
    for (i, s) in sites.iter().enumerate() {
        for poi in pois {
            let d = poi_distance(s, poi)?;
            let _ = writeln!(
                p,
                "| {} | {} | {} | {:.1} | {} |",
                site_label(i),
                poi.category,
                poi.name.as_deref().unwrap_or("-"),
                d,
                if poi.is_active(&ctx.timestamp) { "yes" } else { "no" }
            );
            rows += 1;
        }
    }
    if rows == 0 {
        p.push_str("| - | none | - | - | - |\n");
    }

    p.push_str("\n## Dynamic Context\n");
    let _ = writeln!(
        p,
        "- time: {} ({})",
        ctx.timestamp.format("%Y-%m-%d %H:%M"),
        ctx.describe()
    );
    let _ = writeln!(
        p,
        "- events: {}",
        if ctx.events.is_empty() {
            "none".to_string()
        } else {
            ctx.events.join(", ")
        }
    );

    p.push_str("\n## Regulatory Constraints\n");
    let _ = writeln!(
        p,
        "- Keep a 1:1 buffer: lateral distance to people and sensitive facilities must be at least the operating altitude ({:.1} m).",
        reg.operating_altitude_m
    );
    let cats: Vec<String> = reg
        .sensitive_categories
        .iter()
        .map(|(c, w)| format!("{c} ({w:.2})"))
        .collect();
    let _ = writeln!(p, "- sensitive categories (risk weight): {}", cats.join(", "));

    p.push_str(
        "\nReturn a strict ranking with one line per site, best first, formatted exactly as:\n\
         Rank <n>: <site>. Justification: <one sentence>.\n",
    );
    Ok(p)
}

/// One parsed line of a model's ranking reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvisoryRank {
    pub rank: usize,
    /// Index into the `sites` slice given to [`build_ranking_prompt`].
    pub site_index: usize,
    pub justification: String,
}

/// Parses `Rank <n>: S<k>. Justification: ...` lines. Fails unless every site
/// appears exactly once with ranks `1..=site_count`.
pub fn parse_ranking_reply(text: &str, site_count: usize) -> Result<Vec<AdvisoryRank>, RankerError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['*', '-', ' ']);
        let Some(rest) = line.strip_prefix("Rank ") else {
            continue;
        };
        let Some((num, rest)) = rest.split_once(':') else {
            continue;
        };
        let Ok(rank) = num.trim().parse::<usize>() else {
            continue;
        };
        let rest = rest.trim();
        let (site, justification) = match rest.split_once("Justification:") {
            Some((s, j)) => (s, j.trim()),
            None => (rest, ""),
        };
        let site = site.trim().trim_end_matches(['.', ',', ';']).trim();
        let index = site
            .strip_prefix('S')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1 && n <= site_count)
            .ok_or_else(|| RankerError::Invalid(format!("unknown site {site:?} in ranking reply")))?;
        out.push(AdvisoryRank {
            rank,
            site_index: index - 1,
            justification: justification.to_string(),
        });
    }
    out.sort_by_key(|r| r.rank);
    let ranks_ok = out.iter().enumerate().all(|(i, r)| r.rank == i + 1);
    let mut seen: Vec<usize> = out.iter().map(|r| r.site_index).collect();
    seen.sort_unstable();
    seen.dedup();
    if out.len() != site_count || !ranks_ok || seen.len() != site_count {
        return Err(RankerError::Invalid("ranking reply is not a strict ranking of all sites".into()));
    }
    Ok(out)
}
