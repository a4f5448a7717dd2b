//! Seeded synthetic corpora: a planted-topic corpus for recovery checks and a
//! small bilingual tweet archive exercising every pipeline stage.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ingest::TweetRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub docs: usize,
    pub topics: usize,
    pub terms_per_topic: usize,
    pub noise_terms: usize,
    /// Chance that a document is about each topic, independently per topic.
    pub topic_rate: f64,
    /// Chance that a document includes each term of a topic it is about.
    pub topic_term_rate: f64,
    /// Chance that a document includes each noise term.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            docs: 3000,
            topics: 3,
            terms_per_topic: 10,
            noise_terms: 20,
            topic_rate: 0.4,
            topic_term_rate: 0.5,
            noise_rate: 0.1,
            seed: 7,
        }
    }
}

impl PlantedSpec {
    pub fn topic_terms(&self, topic: usize) -> Vec<String> {
        (0..self.terms_per_topic)
            .map(|i| format!("topic{topic}term{i}"))
            .collect()
    }

    pub fn noise_term(&self, i: usize) -> String {
        format!("noise{i}")
    }
}

/// Documents drawn from disjoint topics. A document is about each topic with
/// `topic_rate`, independently; for every such topic it keeps each term with
/// `topic_term_rate` (at least two). Noise terms are added independently.
pub fn planted_corpus(spec: &PlantedSpec) -> Vec<TweetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = Utc.with_ymd_and_hms(2018, 4, 1, 0, 0, 0).unwrap();
    let topics: Vec<Vec<String>> = (0..spec.topics).map(|t| spec.topic_terms(t)).collect();
    (0..spec.docs)
        .map(|d| {
            let mut words: Vec<String> = Vec::new();
            for topic in &topics {
                if !rng.gen_bool(spec.topic_rate) {
                    continue;
                }
                let mut picked: Vec<String> = Vec::new();
                while picked.len() < 2 {
                    picked = topic
                        .iter()
                        .filter(|_| rng.gen_bool(spec.topic_term_rate))
                        .cloned()
                        .collect();
                }
                words.extend(picked);
            }
            for i in 0..spec.noise_terms {
                if rng.gen_bool(spec.noise_rate) {
                    words.push(spec.noise_term(i));
                }
            }
            if words.is_empty() {
                words.push(spec.noise_term(rng.gen_range(0..spec.noise_terms.max(1))));
            }
            words.shuffle(&mut rng);
            TweetRecord {
                id: format!("p{d:05}"),
                text: words.join(" "),
                language: "en".into(),
                author_id: format!("author{:03}", d % 200),
                is_retweet: false,
                created_at: start + Duration::minutes(d as i64),
                user_location: None,
            }
        })
        .collect()
}

/// One line of a tweet archive, including the optional author bot score.
#[derive(Debug, Clone, Serialize)]
pub struct ArchiveLine {
    #[serde(flatten)]
    pub tweet: TweetRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bot_score: Option<f64>,
}

struct LanguageProfile {
    code: &'static str,
    topics: &'static [&'static [&'static str]],
    fillers: &'static [&'static str],
    keywords: &'static [&'static str],
    textisms: &'static [&'static str],
    spam: &'static [&'static str],
    off_topic: &'static [&'static str],
    locations: &'static [&'static str],
    users: usize,
}

const SPANISH: LanguageProfile = LanguageProfile {
    code: "es",
    topics: &[
        &["zuckerberg", "congreso", "senado", "mark", "disculpa", "error", "audiencia", "testimonio"],
        &["datos", "privacidad", "protección", "rgpd", "usuarios", "ley", "regulación", "personales"],
        &["elecciones", "campaña", "votantes", "política", "brexit", "manipulación", "rusia", "trump"],
        &["redes", "sociales", "twitter", "instagram", "youtube", "marketing", "digital", "whatsapp"],
    ],
    fillers: &["el", "la", "de", "que", "en", "los", "por", "una", "con", "para"],
    keywords: &["#CambridgeAnalytica", "Cambridge Analytica", "Facebook", "#Facebook"],
    textisms: &["fb", "zuck", "privasidad"],
    spam: &["gana", "dinero", "sorteo", "bitcoin", "cripto", "regalo", "premio", "gratis"],
    off_topic: &["hoy hace sol en la playa", "buenos días a todos", "qué partido más bueno"],
    locations: &[
        "Madrid, España", "Barcelona", "CDMX, México", "Monterrey", "Buenos Aires, Argentina",
        "Santiago, Chile", "Valparaíso", "Bogotá, Colombia", "Caracas, Venezuela", "Lima, Perú",
        "Quito", "Miami, FL", "en mi casa", "", "🌎", "Sevilla", "Guadalajara, Jalisco",
    ],
    users: 150,
};

const ENGLISH: LanguageProfile = LanguageProfile {
    code: "en",
    topics: &[
        &["zuckerberg", "mark", "testifies", "ceo", "congress", "committee", "senate", "hearing"],
        &["data", "users", "privacy", "personal", "access", "law", "protection", "gdpr"],
        &["election", "campaign", "voters", "vote", "brexit", "trump", "russia", "democracy"],
        &["social", "media", "twitter", "instagram", "censorship", "conservative", "delete", "account"],
    ],
    fillers: &["the", "a", "of", "and", "to", "is", "in", "for", "on", "with"],
    keywords: &["#CambridgeAnalytica", "Cambridge Analytica", "Facebook", "#DeleteFacebook"],
    textisms: &["fb", "govt", "bf"],
    spam: &["win", "free", "bitcoin", "crypto", "giveaway", "prize", "signal", "btc"],
    off_topic: &["lovely weather today", "good morning everyone", "what a game last night"],
    locations: &[
        "Seattle, WA, USA", "New York, NY", "London, UK", "Manchester, England", "Toronto, Canada",
        "Mumbai, India", "Sydney, Australia", "Paris, France", "Berlin", "Dubai",
        "Amsterdam", "Dublin, Ireland", "Earth", "", "somewhere over the rainbow", "Texas", "California",
    ],
    users: 200,
};

/// The bundled bilingual archive, deterministic for a given seed.
///
/// Besides on-topic Spanish and English tweets it contains retweets, off-topic
/// tweets that miss every keyword, spam from high-scoring bot accounts, a few
/// Portuguese records, and URLs, mentions and textisms in the text.
pub fn bilingual_archive(seed: u64) -> Vec<ArchiveLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2018, 4, 1, 0, 0, 0).unwrap();
    let mut lines = Vec::new();
    let mut serial = 0usize;
    for profile in [&SPANISH, &ENGLISH] {
        for u in 0..profile.users {
            let user = format!("{}{u:03}", profile.code);
            let is_bot = u % 9 == 4;
            let score = if is_bot {
                rng.gen_range(0.62..0.97)
            } else {
                rng.gen_range(0.01..0.45)
            };
            let score = (score * 10_000.0f64).round() / 10_000.0;
            let location = *profile.locations.choose(&mut rng).unwrap();
            let count = if is_bot { rng.gen_range(8..16) } else { 1 + rng.gen_range(0..4) * rng.gen_range(1..4) };
            let favourite = rng.gen_range(0..profile.topics.len());
            for _ in 0..count {
                serial += 1;
                let created_at = start + Duration::minutes(rng.gen_range(0..60 * 24 * 90));
                let (text, is_retweet) = compose(profile, &mut rng, is_bot, favourite);
                lines.push(ArchiveLine {
                    tweet: tweet(serial, profile.code, &user, text, is_retweet, created_at, location),
                    bot_score: Some(score),
                });
            }
        }
    }
    for i in 0..5 {
        serial += 1;
        lines.push(ArchiveLine {
            tweet: tweet(
                serial,
                "pt",
                &format!("pt{i:03}"),
                "escândalo da Cambridge Analytica no Facebook".into(),
                false,
                start,
                "Lisboa",
            ),
            bot_score: None,
        });
    }
    lines.sort_by(|a, b| {
        a.tweet
            .created_at
            .cmp(&b.tweet.created_at)
            .then_with(|| a.tweet.id.cmp(&b.tweet.id))
    });
    lines
}

fn tweet(
    serial: usize,
    lang: &str,
    user: &str,
    text: String,
    is_retweet: bool,
    created_at: DateTime<Utc>,
    location: &str,
) -> TweetRecord {
    TweetRecord {
        id: format!("{serial:06}"),
        text,
        language: lang.into(),
        author_id: user.into(),
        is_retweet,
        created_at,
        user_location: (!location.is_empty()).then(|| location.to_string()),
    }
}

fn compose(profile: &LanguageProfile, rng: &mut ChaCha8Rng, is_bot: bool, favourite: usize) -> (String, bool) {
    let mut words: Vec<String> = Vec::new();
    if is_bot {
        words.extend(profile.spam.choose_multiple(rng, 4).map(|w| w.to_string()));
    } else if rng.gen_bool(0.08) {
        return (profile.off_topic.choose(rng).unwrap().to_string(), false);
    } else {
        let topic = if rng.gen_bool(0.6) { favourite } else { rng.gen_range(0..profile.topics.len()) };
        let n = rng.gen_range(3..6);
        words.extend(profile.topics[topic].choose_multiple(rng, n).map(|w| w.to_string()));
        if rng.gen_bool(0.2) {
            words.push(profile.textisms.choose(rng).unwrap().to_string());
        }
    }
    words.extend(profile.fillers.choose_multiple(rng, 3).map(|w| w.to_string()));
    words.shuffle(rng);
    if let Some(first) = words.first_mut() {
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_uppercase().chain(chars).collect();
        }
    }
    words.push(profile.keywords.choose(rng).unwrap().to_string());
    if rng.gen_bool(0.3) {
        words.push(format!("@user{}", rng.gen_range(0..500)));
    }
    if rng.gen_bool(0.3) {
        words.push(format!("https://t.co/{:08x}", rng.gen::<u32>()));
    }
    let text = words.join(" ");
    if rng.gen_bool(0.25) {
        (format!("RT @user{}: {text}", rng.gen_range(0..500)), true)
    } else {
        (text, false)
    }
}

/// Serialises archive lines as JSON Lines.
pub fn to_jsonl(lines: &[ArchiveLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("archive lines serialise"));
        out.push('\n');
    }
    out
}

/// Seed of the bundled archive.
pub const BUNDLED_SEED: u64 = 2018;
/// Line after which the bundled archive carries a deliberately malformed record.
const MALFORMED_AFTER: usize = 100;

/// Exact contents of the bundled `corpus.jsonl`.
pub fn bundled_archive_text() -> String {
    let body = to_jsonl(&bilingual_archive(BUNDLED_SEED));
    let mut text = String::with_capacity(body.len() + 64);
    for (i, line) in body.lines().enumerate() {
        if i == MALFORMED_AFTER {
            text.push_str("{\"id\": \"broken\", \"text\": \"truncated record\n");
        }
        text.push_str(line);
        text.push('\n');
    }
    text
}
