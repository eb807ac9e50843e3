//! Seeded planted-cluster corpora.
//!
//! Every entity belongs to a cluster. A cluster carries a theme (industry
//! paths, description vocabulary, customer segments, cities and a funding
//! stage profile), and records are drawn from that theme with some tokens
//! replaced by a pool shared across all clusters. Companies additionally
//! belong to one of `niches` product lines inside their cluster; companies
//! in the same niche share the first sentence of their description and
//! their primary industry. Links are Bernoulli draws with mean rate
//! `p_in` inside a cluster and `p_out` across clusters; inside a cluster the
//! rate is tilted towards the niches each investor favours.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompanyRecord, Corpus, CorpusError, InvestorRecord, Pair, RoundVocabulary};
use crate::config::{ConfigError, KvConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub clusters: usize,
    pub investors: usize,
    pub companies: usize,
    /// Link probability inside a cluster.
    pub p_in: f64,
    /// Link probability across clusters.
    pub p_out: f64,
    pub seed: u64,
    /// Product lines per cluster.
    pub niches: usize,
    /// Probability that a themed token is replaced by one from the shared pool.
    pub feature_noise: f64,
    /// Investor activity multipliers are drawn from `[1 - spread, 1 + spread]`
    /// and scale both link probabilities. 0 gives plain Bernoulli links.
    pub activity_spread: f64,
    /// Each investor favours a random half of its cluster's niches. Inside
    /// the cluster, favoured companies link with probability `p_in + t` and
    /// the rest with `p_in - t`, where `t = affinity * min(p_in, 1 - p_in)`,
    /// so the expected intra-cluster link rate stays `p_in`.
    pub niche_affinity: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            clusters: 2,
            investors: 200,
            companies: 500,
            p_in: 0.3,
            p_out: 0.02,
            seed: 0,
            niches: 16,
            feature_noise: 0.2,
            activity_spread: 0.5,
            niche_affinity: 0.9,
        }
    }
}

impl SyntheticConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        kv.set("synth.clusters", &mut c.clusters)?;
        kv.set("synth.investors", &mut c.investors)?;
        kv.set("synth.companies", &mut c.companies)?;
        kv.set("synth.p_in", &mut c.p_in)?;
        kv.set("synth.p_out", &mut c.p_out)?;
        kv.set("synth.niches", &mut c.niches)?;
        kv.set("synth.feature_noise", &mut c.feature_noise)?;
        kv.set("synth.activity_spread", &mut c.activity_spread)?;
        kv.set("synth.niche_affinity", &mut c.niche_affinity)?;
        c.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::Synthetic(msg));
        if self.clusters == 0 {
            return bad("clusters must be >= 1".into());
        }
        if self.investors == 0 || self.companies == 0 {
            return bad("investor and company counts must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad("link probabilities must lie in [0, 1]".into());
        }
        if self.p_in <= self.p_out {
            return bad(format!(
                "p_in ({}) must exceed p_out ({})",
                self.p_in, self.p_out
            ));
        }
        if self.niches == 0 {
            return bad("niches must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.feature_noise) {
            return bad("feature_noise must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.activity_spread) {
            return bad("activity_spread must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.niche_affinity) {
            return bad("niche_affinity must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// A generated corpus together with the planted cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub investor_clusters: Vec<usize>,
    pub company_clusters: Vec<usize>,
    pub company_niches: Vec<usize>,
}

struct Theme {
    label: &'static str,
    industries: &'static [&'static str],
    words: &'static [&'static str],
    customers: &'static [&'static str],
    cities: &'static [&'static str],
}

const THEMES: &[Theme] = &[
    Theme {
        label: "Software",
        industries: &[
            "Information Technology/Software/Enterprise Software",
            "Information Technology/Software/Application Software",
            "Information Technology/Software/Database Software",
            "Information Technology/Communications and Networking",
            "Information Technology/Software/Security Software",
            "Information Technology/Software/Development Tools",
            "Information Technology/Semiconductors",
            "Information Technology/Storage",
        ],
        words: &[
            "cloud", "analytics", "workflow", "automation", "database", "api", "saas", "developer",
            "cybersecurity", "observability",
        ],
        customers: &["enterprises", "developers", "it teams", "sales teams"],
        cities: &[
            "San Francisco, California, United States",
            "Seattle, Washington, United States",
            "Austin, Texas, United States",
        ],
    },
    Theme {
        label: "Biotech",
        industries: &[
            "Healthcare/Biotechnology/Drug Discovery",
            "Healthcare/Healthcare Services/Clinics",
            "Healthcare/Medical Devices/Diagnostics",
            "Healthcare/Pharmaceuticals/Therapeutics",
            "Healthcare/Biotechnology/Genomics",
            "Healthcare/Medical Devices/Surgical Devices",
            "Healthcare/Healthcare Technology Systems",
            "Healthcare/Biotechnology/Animal Health",
        ],
        words: &[
            "clinical", "therapeutics", "genomic", "diagnostic", "patient", "drug", "protein",
            "oncology", "biologic", "imaging",
        ],
        customers: &["hospitals", "clinicians", "patients", "pharmacies"],
        cities: &[
            "Boston, Massachusetts, United States",
            "San Diego, California, United States",
            "Durham, North Carolina, United States",
        ],
    },
    Theme {
        label: "Fintech",
        industries: &[
            "Financial Services/Other Financial Services/Consumer Finance",
            "Financial Services/Financial Software",
            "Financial Services/Insurance",
            "Financial Services/Payments",
            "Financial Services/Lending",
            "Financial Services/Wealth Management",
            "Financial Services/Capital Markets",
            "Financial Services/Banking",
        ],
        words: &[
            "payments", "credit", "lending", "insurance", "banking", "wealth", "fraud", "ledger",
            "card", "loan",
        ],
        customers: &["consumers", "merchants", "lenders", "insurers"],
        cities: &[
            "New York, New York, United States",
            "Charlotte, North Carolina, United States",
            "Atlanta, Georgia, United States",
        ],
    },
    Theme {
        label: "Energy",
        industries: &[
            "Energy/Renewable Energy/Solar",
            "Energy/Energy Storage",
            "Energy/Utilities/Grid Services",
            "Energy/Energy Equipment",
            "Energy/Renewable Energy/Wind",
            "Energy/Oil and Gas",
            "Energy/Energy Efficiency",
            "Energy/Renewable Energy/Hydrogen",
        ],
        words: &[
            "solar", "battery", "grid", "storage", "carbon", "hydrogen", "wind", "charging",
            "turbine", "electrification",
        ],
        customers: &["utilities", "homeowners", "factories", "municipalities"],
        cities: &[
            "Denver, Colorado, United States",
            "Houston, Texas, United States",
            "Phoenix, Arizona, United States",
        ],
    },
    Theme {
        label: "Consumer",
        industries: &[
            "Consumer Products and Services/Apparel",
            "Consumer Products and Services/Food and Beverage",
            "Consumer Products and Services/Restaurants, Hotels and Leisure",
            "Consumer Products and Services/Personal Products",
            "Consumer Products and Services/Home Furnishings",
            "Consumer Products and Services/Pet Products",
            "Consumer Products and Services/Fitness",
            "Consumer Products and Services/Retail",
        ],
        words: &[
            "apparel", "beverage", "snack", "beauty", "grocery", "fashion", "restaurant", "skincare",
            "furniture", "pet",
        ],
        customers: &["shoppers", "families", "diners", "travelers"],
        cities: &[
            "Los Angeles, California, United States",
            "Miami, Florida, United States",
            "Portland, Oregon, United States",
        ],
    },
    Theme {
        label: "Mobility",
        industries: &[
            "Transportation/Logistics",
            "Transportation/Automotive",
            "Transportation/Marine",
            "Transportation/Aerospace",
            "Transportation/Rail",
            "Transportation/Ride Sharing",
            "Transportation/Electric Vehicles",
            "Transportation/Freight",
        ],
        words: &[
            "fleet", "freight", "vehicle", "autonomous", "marine", "shipping", "drone", "routing",
            "mobility", "aviation",
        ],
        customers: &["shippers", "carriers", "commuters", "airlines"],
        cities: &[
            "Detroit, Michigan, United States",
            "Pittsburgh, Pennsylvania, United States",
            "Memphis, Tennessee, United States",
        ],
    },
    Theme {
        label: "Media",
        industries: &[
            "Media and Information Services/Publishing",
            "Media and Information Services/Gaming",
            "Media and Information Services/Broadcasting",
            "Media and Information Services/Social Media",
            "Media and Information Services/Music",
            "Media and Information Services/Advertising",
            "Media and Information Services/Film",
            "Media and Information Services/Education Content",
        ],
        words: &[
            "video", "gaming", "streaming", "music", "news", "podcast", "creator", "audience",
            "advertising", "esports",
        ],
        customers: &["creators", "publishers", "advertisers", "fans"],
        cities: &[
            "Nashville, Tennessee, United States",
            "Brooklyn, New York, United States",
            "Burbank, California, United States",
        ],
    },
    Theme {
        label: "Industrial",
        industries: &[
            "Industrial Supplies/Manufacturing",
            "Industrial Supplies/Robotics",
            "Industrial Supplies/Metals and Minerals",
            "Industrial Supplies/Construction",
            "Industrial Supplies/Chemicals",
            "Industrial Supplies/Packaging",
            "Industrial Supplies/Machinery",
            "Industrial Supplies/Electrical Equipment",
        ],
        words: &[
            "robotics", "manufacturing", "sensor", "machining", "construction", "materials",
            "metal", "welding", "printing", "inspection",
        ],
        customers: &["manufacturers", "builders", "contractors", "mines"],
        cities: &[
            "Cleveland, Ohio, United States",
            "Milwaukee, Wisconsin, United States",
            "Columbus, Ohio, United States",
        ],
    },
];

const SHARED_INDUSTRIES: &[&str] = &[
    "Business Products and Services/Other",
    "Information Technology/IT Services",
    "Business Products and Services/Commercial Services",
];
const SHARED_CITIES: &[&str] = &[
    "Chicago, Illinois, United States",
    "Toronto, Ontario, Canada",
    "London, England, United Kingdom",
];
const PRODUCTS: &[&str] = &["platform", "software", "solutions", "systems", "products", "tools"];
const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ve", "to", "zen", "qua", "tri", "nex", "sol", "bri", "dor", "fy",
    "gal", "hu",
];
fn random_word(rng: &mut ChaCha8Rng) -> String {
    (0..3).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    chars
        .next()
        .map(|c| c.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

const INVESTOR_KINDS: &[&str] = &["Capital", "Partners", "Ventures", "Equity"];

struct Picker<'a> {
    rng: &'a mut ChaCha8Rng,
    noise: f64,
}

impl Picker<'_> {
    fn pick(&mut self, themed: &'static [&'static str], shared: &'static [&'static str]) -> &'static str {
        let pool = if self.rng.random_bool(self.noise) {
            shared
        } else {
            themed
        };
        pool.choose(self.rng).expect("pools are nonempty")
    }
}

fn theme_of(cluster: usize) -> (&'static Theme, Option<usize>) {
    let generation = cluster / THEMES.len();
    (
        &THEMES[cluster % THEMES.len()],
        (generation > 0).then_some(generation),
    )
}

/// Funding-stage centre for a cluster, as an index into the round vocabulary.
fn stage_centre(cluster: usize, clusters: usize, rounds: usize) -> usize {
    let pos = (cluster as f64 + 0.5) / clusters as f64 * rounds as f64;
    (pos.floor() as usize).min(rounds - 1)
}

/// Company headquarters are not tied to a cluster.
fn all_cities() -> Vec<&'static str> {
    THEMES
        .iter()
        .flat_map(|t| t.cities.iter().copied())
        .chain(SHARED_CITIES.iter().copied())
        .collect()
}

/// A made-up product-line name, unique per `(cluster, niche)` below 4096 pairs.
fn niche_term(cluster: usize, niche: usize, niches: usize) -> String {
    let k = cluster * niches + niche;
    let n = SYLLABLES.len();
    format!(
        "{}{}{}",
        SYLLABLES[k % n],
        SYLLABLES[(k / n) % n],
        SYLLABLES[(k / (n * n)) % n]
    )
}

/// What every company of one niche has in common.
struct Niche {
    term: String,
    focus: &'static str,
    product: &'static str,
    customer: &'static str,
    industry: &'static str,
    stage_offset: i64,
}

fn make_niches(cluster: usize, config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<Niche> {
    let (theme, _) = theme_of(cluster);
    (0..config.niches)
        .map(|n| Niche {
            term: niche_term(cluster, n, config.niches),
            focus: theme.words.choose(rng).expect("pool is nonempty"),
            product: PRODUCTS.choose(rng).expect("pool is nonempty"),
            customer: theme.customers.choose(rng).expect("pool is nonempty"),
            industry: theme.industries.choose(rng).expect("pool is nonempty"),
            stage_offset: rng.random_range(-1..=1),
        })
        .collect()
}

fn make_company(
    j: usize,
    cluster: usize,
    niches: &[Niche],
    config: &SyntheticConfig,
    rounds: &RoundVocabulary,
    rng: &mut ChaCha8Rng,
) -> (CompanyRecord, usize) {
    let (theme, generation) = theme_of(cluster);
    let niche = rng.random_range(0..niches.len());
    let profile = &niches[niche];
    let mut p = Picker {
        rng,
        noise: config.feature_noise,
    };
    let segment = generation.map(|g| format!(" segment{g}")).unwrap_or_default();
    let year_founded = p.rng.random_range(1995..=2022);
    let description = format!(
        "Develops {} {} {}{segment} for {}.",
        profile.term, profile.focus, profile.product, profile.customer
    );

    let mut industry_focus: BTreeSet<String> = BTreeSet::new();
    industry_focus.insert(format!("{}{segment}", profile.industry));
    if p.rng.random_bool(config.feature_noise) {
        industry_focus.insert(format!("{}{segment}", p.pick(theme.industries, SHARED_INDUSTRIES)));
    }
    let cities = all_cities();
    let city = cities.choose(p.rng).expect("city pool is nonempty");
    let region = city.split_once(", ").map_or(*city, |(_, r)| r);
    let location = format!("{}, {region}", capitalize(&random_word(p.rng)));

    let n_rounds = rounds.len();
    let stage = if p.rng.random_bool(config.feature_noise) {
        p.rng.random_range(0..n_rounds)
    } else {
        let centre = stage_centre(cluster, config.clusters, n_rounds) as i64;
        (centre + profile.stage_offset).clamp(0, n_rounds as i64 - 1) as usize
    };
    let funding_rounds = rounds.labels()[..=stage].iter().cloned().collect();

    let record = CompanyRecord {
        id: format!("{} {:04}, LLC", theme.label, j),
        description,
        industry_focus: industry_focus.into_iter().collect(),
        year_founded,
        location,
        funding_rounds,
    };
    (record, niche)
}

fn make_investor(
    i: usize,
    cluster: usize,
    config: &SyntheticConfig,
    rounds: &RoundVocabulary,
    rng: &mut ChaCha8Rng,
) -> InvestorRecord {
    let (theme, generation) = theme_of(cluster);
    let segment = generation.map(|g| format!(" segment{g}")).unwrap_or_default();
    let mut p = Picker {
        rng,
        noise: config.feature_noise,
    };
    let n_rounds = rounds.len();
    let centre = stage_centre(cluster, config.clusters, n_rounds) as f64;
    let mut round_deal_counts = BTreeMap::new();
    for (r, label) in rounds.labels().iter().enumerate() {
        let affinity = if p.rng.random_bool(config.feature_noise) {
            p.rng.random_range(0.0..1.0)
        } else {
            (-(r as f64 - centre).abs()).exp()
        };
        let count = (20.0 * affinity * p.rng.random_range(0.5..1.5)).round() as u64;
        if count > 0 {
            round_deal_counts.insert(label.clone(), count);
        }
    }
    let mut industry_deal_counts = BTreeMap::new();
    for industry in theme.industries {
        industry_deal_counts.insert(format!("{industry}{segment}"), p.rng.random_range(1..=20u64));
    }
    if p.rng.random_bool(config.feature_noise) {
        let shared = SHARED_INDUSTRIES.choose(p.rng).expect("pool is nonempty");
        industry_deal_counts.insert(format!("{shared}{segment}"), p.rng.random_range(1..=20u64));
    }
    let location = if p.rng.random_bool(config.feature_noise) {
        p.pick(theme.cities, SHARED_CITIES)
    } else {
        theme.cities[0]
    }
    .to_string();
    let kind = INVESTOR_KINDS[i % INVESTOR_KINDS.len()];
    InvestorRecord {
        id: format!("{} {} {:04}", theme.label, kind, i),
        round_deal_counts,
        industry_deal_counts,
        location,
    }
}

/// Generate a planted-cluster corpus. Entity `k` belongs to cluster `k % clusters`.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    rounds: &RoundVocabulary,
) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let mut feature_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut link_rng = ChaCha8Rng::seed_from_u64(config.seed);
    link_rng.set_stream(1);

    let investor_clusters: Vec<usize> = (0..config.investors).map(|i| i % config.clusters).collect();
    let company_clusters: Vec<usize> = (0..config.companies).map(|j| j % config.clusters).collect();

    let mut niche_rng = ChaCha8Rng::seed_from_u64(config.seed);
    niche_rng.set_stream(2);
    let niches: Vec<Vec<Niche>> = (0..config.clusters)
        .map(|c| make_niches(c, config, &mut niche_rng))
        .collect();
    let (companies, company_niches): (Vec<CompanyRecord>, Vec<usize>) = company_clusters
        .iter()
        .enumerate()
        .map(|(j, &c)| make_company(j, c, &niches[c], config, rounds, &mut feature_rng))
        .unzip();
    let investors: Vec<InvestorRecord> = investor_clusters
        .iter()
        .enumerate()
        .map(|(i, &c)| make_investor(i, c, config, rounds, &mut feature_rng))
        .collect();

    let mut links: Vec<Pair> = Vec::new();
    for (i, &ci) in investor_clusters.iter().enumerate() {
        let activity = if config.activity_spread > 0.0 {
            link_rng.random_range(1.0 - config.activity_spread..=1.0 + config.activity_spread)
        } else {
            1.0
        };
        let tilt = config.niche_affinity * config.p_in.min(1.0 - config.p_in);
        let favoured: Vec<bool> = (0..config.niches).map(|_| link_rng.random_bool(0.5)).collect();
        for (j, &cj) in company_clusters.iter().enumerate() {
            let base = if ci != cj {
                config.p_out
            } else if favoured[company_niches[j]] {
                config.p_in + tilt
            } else {
                config.p_in - tilt
            };
            if link_rng.random_bool((base * activity).min(1.0)) {
                links.push((i, j));
            }
        }
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::new(rounds.clone(), companies, investors, links)?,
        investor_clusters,
        company_clusters,
        company_niches,
    })
}
