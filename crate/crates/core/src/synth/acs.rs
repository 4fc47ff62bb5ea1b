//! ACS-like person records: the sixteen regressors of the wage model plus
//! the fields the sample filters read (age, usual hours, weeks worked) and
//! the highest degree used to stratify.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{substream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcsSpec {
    pub n: usize,
    pub seed: u64,
}

impl Default for AcsSpec {
    fn default() -> Self {
        Self { n: 1000, seed: 2016 }
    }
}

const MARST: [(&str, f64); 6] = [
    ("never_married", 0.22),
    ("married_present", 0.55),
    ("married_absent", 0.04),
    ("separated", 0.04),
    ("divorced", 0.12),
    ("widowed", 0.03),
];

const RACE: [(&str, f64); 4] = [("white", 0.79), ("black", 0.11), ("chinese", 0.05), ("other", 0.05)];

const ENGLISH: [(&str, f64); 5] = [
    ("only_english", 0.68),
    ("very_well", 0.12),
    ("well", 0.09),
    ("not_well", 0.06),
    ("not_at_all", 0.05),
];

const INDUSTRY: [&str; 14] = [
    "agriculture",
    "mining",
    "construction",
    "manufacturing_durable",
    "manufacturing_nondurable",
    "transportation",
    "wholesale_trade",
    "retail_trade",
    "finance",
    "business_services",
    "personal_services",
    "entertainment",
    "professional_services",
    "public_administration",
];

const OCCUPATION: [&str; 26] = [
    "management",
    "business_finance",
    "computer_math",
    "architecture_engineering",
    "science",
    "community_social",
    "legal",
    "education",
    "arts_media",
    "healthcare_practitioners",
    "healthcare_support",
    "protective_service",
    "food_preparation",
    "building_maintenance",
    "personal_care",
    "sales",
    "office_admin",
    "farming",
    "construction_trades",
    "extraction",
    "installation_repair",
    "production",
    "transportation",
    "material_moving",
    "military",
    "technicians",
];

const REGION: [&str; 9] = [
    "new_england",
    "middle_atlantic",
    "east_north_central",
    "west_north_central",
    "south_atlantic",
    "east_south_central",
    "west_south_central",
    "mountain",
    "pacific",
];

fn pick<'a>(rng: &mut StreamRng, table: &[(&'a str, f64)]) -> (usize, &'a str) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, (name, p)) in table.iter().enumerate() {
        acc += p;
        if u < acc {
            return (k, name);
        }
    }
    let k = table.len() - 1;
    (k, table[k].0)
}

fn bernoulli(rng: &mut StreamRng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Fixed per-level effect in [−amp, amp], zero for level 0.
fn level_effect(k: usize, amp: f64, phase: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        amp * ((k as f64) * 1.7 + phase).sin()
    }
}

fn hours_category(h: u32) -> &'static str {
    match h {
        0..=34 => "under_35",
        35..=40 => "h35_40",
        41..=44 => "h41_44",
        45..=49 => "h45_49",
        50..=59 => "h50_59",
        _ => "h60_plus",
    }
}

/// CSV text with a header row. Annual wage income in dollars with cents.
pub fn acs_csv(spec: &AcsSpec) -> String {
    let mut rng = substream(spec.seed, 0);
    let mut out = String::from(
        "incwage,female,age,uhrswork,wkswork,degree,marst,child4,child18,race,hispanic,english,\
         exper,educ,veteran,industry,occupation,hours,region,msa\n",
    );
    for _ in 0..spec.n {
        let female = bernoulli(&mut rng, 0.45);
        let age: u32 = rng.random_range(23..=67);
        let bachelor = bernoulli(&mut rng, 0.45);
        let educ: u32 = if bachelor {
            16 + rng.random_range(0..=4u32).min(rng.random_range(0..=4u32))
        } else {
            rng.random_range(10..=12u32).max(rng.random_range(10..=12u32))
        };
        let exper = age.saturating_sub(educ + 6);
        let (mk, marst) = pick(&mut rng, &MARST);
        let married = mk == 1;
        let child18 = bernoulli(&mut rng, if married { 0.5 } else { 0.2 });
        let child4 = child18 && bernoulli(&mut rng, if age < 40 { 0.45 } else { 0.12 });
        let (rk, race) = pick(&mut rng, &RACE);
        let hispanic = bernoulli(&mut rng, 0.12);
        let (ek, english) = pick(&mut rng, &ENGLISH);
        let veteran = bernoulli(&mut rng, if female { 0.04 } else { 0.09 });
        let ik = rng.random_range(0..INDUSTRY.len());
        let ok = rng.random_range(0..OCCUPATION.len());
        let gk = rng.random_range(0..REGION.len());
        let msa = bernoulli(&mut rng, 0.86);
        let uhrswork: u32 = if bernoulli(&mut rng, 0.6) {
            40
        } else {
            rng.random_range(32..=66)
        };
        let wkswork: u32 = if bernoulli(&mut rng, 0.9) { 52 } else { rng.random_range(44..=51) };
        let hk = match hours_category(uhrswork) {
            "h41_44" => 1,
            "h45_49" => 2,
            "h50_59" => 3,
            "h60_plus" => 4,
            _ => 0,
        };

        let (x, e) = (exper as f64, educ as f64);
        let mut lw = 5.0 + 0.085 * e + 0.032 * x - 0.0005 * x * x
            + level_effect(ok, 0.35, 0.0)
            + level_effect(ik, 0.2, 1.0)
            + level_effect(gk, 0.08, 2.0)
            + level_effect(rk, 0.1, 0.5)
            + level_effect(ek, 0.12, 1.5)
            + 0.06 * hk as f64
            + 0.08 * f64::from(u8::from(married))
            + 0.05 * f64::from(u8::from(msa))
            - 0.04 * f64::from(u8::from(hispanic));
        if female {
            lw += -0.2 - 0.06 * f64::from(u8::from(married)) - 0.05 * f64::from(u8::from(child18))
                - 0.04 * f64::from(u8::from(child4))
                + 0.02 * (e - 12.0)
                + level_effect(ok, 0.08, 3.0)
                - 0.02 * hk as f64;
        }
        lw += 0.42 * rng.sample::<f64, _>(StandardNormal);
        let incwage = (lw.exp() * 52.0 * 100.0).round() / 100.0;

        let b = |v: bool| u8::from(v);
        let _ = writeln!(
            out,
            "{incwage:.2},{},{age},{uhrswork},{wkswork},{},{marst},{},{},{race},{},{english},{exper},{educ},{},{},{},{},{},{}",
            b(female),
            if bachelor { "bachelor" } else { "high_school" },
            b(child4),
            b(child18),
            b(hispanic),
            b(veteran),
            INDUSTRY[ik],
            OCCUPATION[ok],
            hours_category(uhrswork),
            REGION[gk],
            b(msa),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = AcsSpec { n: 50, seed: 1 };
        let a = acs_csv(&spec);
        assert_eq!(a, acs_csv(&spec));
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 51);
        assert!(lines.iter().all(|l| l.split(',').count() == 20));
    }

    #[test]
    fn probability_tables_sum_to_one() {
        for t in [&MARST[..], &RACE[..], &ENGLISH[..]] {
            let s: f64 = t.iter().map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
