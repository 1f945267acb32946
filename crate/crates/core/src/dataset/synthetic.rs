//! Seeded generator for small corpora in the ML-1M file format.
//!
//! Used wherever tests or examples need realistic-looking input without the
//! real dataset: long-tailed item popularity, per-user genre taste, strictly
//! increasing per-user timestamps, and the ML-1M age-code and genre
//! vocabularies.

use super::{
    encode_latin1, write_movies, write_ratings, write_users, AgeBucket, Catalog, CatalogItem,
    Dataset, Gender, Interaction, SkipReport, UserRecord,
};
use crate::seed::rng_for;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;
use std::path::Path;

pub const GENRES: [&str; 18] = [
    "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary", "Drama",
    "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller",
    "War", "Western",
];

const ADJECTIVES: [&str; 48] = [
    "Silent", "Crimson", "Hidden", "Broken", "Golden", "Midnight", "Wild", "Lonely", "Electric",
    "Frozen", "Burning", "Distant", "Forgotten", "Savage", "Gentle", "Restless", "Hollow",
    "Bright", "Northern", "Secret", "Fallen", "Endless", "Painted", "Iron", "Velvet", "Shattered",
    "Wandering", "Sunken", "Emerald", "Bitter", "Quiet", "Reckless", "Scarlet", "Ancient",
    "Stolen", "Twisted", "Pale", "Rising", "Dark", "Sweet", "Crooked", "Glass", "Lucky", "Brave",
    "Cold", "Last", "Little", "Great",
];

const NOUNS: [&str; 48] = [
    "Harbor", "Mountain", "River", "Empire", "Garden", "Highway", "Kingdom", "Shadow", "Station",
    "Island", "Winter", "Summer", "Voyage", "Circus", "Frontier", "Orchard", "Lighthouse",
    "Carnival", "Desert", "Prairie", "Canyon", "Bridge", "Tower", "Forest", "Ocean", "Melody",
    "Letter", "Stranger", "Detective", "Soldier", "Dancer", "Pilot", "Outlaw", "Witness",
    "Machine", "Planet", "Dragon", "Castle", "Village", "Journey", "Promise", "Lantern", "Window",
    "Engine", "Horizon", "Storm", "Passage", "Rebellion",
];

const AGE_CODES: [u8; 7] = [1, 18, 25, 35, 45, 50, 56];
const AGE_WEIGHTS: [u32; 7] = [4, 18, 35, 20, 9, 8, 6];

#[derive(Debug, Clone, Copy)]
pub struct SyntheticParams {
    pub n_users: u32,
    pub n_items: u32,
    pub min_ratings: usize,
    pub max_ratings: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_users: 600,
            n_items: 900,
            min_ratings: 30,
            max_ratings: 160,
            seed: 2024,
        }
    }
}

fn make_titles(n: usize, seed: u64) -> Vec<String> {
    let mut rng = rng_for("synthetic-titles", &[seed]);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = ADJECTIVES.choose(&mut rng).expect("non-empty");
        let b = NOUNS.choose(&mut rng).expect("non-empty");
        let c = NOUNS.choose(&mut rng).expect("non-empty");
        let title = match rng.gen_range(0..4) {
            0 => format!("{a} {b}, The"),
            1 => format!("{b} of the {c}"),
            2 => format!("{a} {b}"),
            _ => format!("{a} {c} and the {b}"),
        };
        if b != c && seen.insert(title.to_lowercase()) {
            out.push(title);
        }
    }
    out
}

pub fn generate(params: &SyntheticParams) -> Dataset {
    let titles = make_titles(params.n_items as usize, params.seed);
    let mut rng = rng_for("synthetic-items", &[params.seed]);
    let mut items = Vec::with_capacity(params.n_items as usize);
    for (k, title) in titles.into_iter().enumerate() {
        let n_genres = *[1usize, 1, 2, 2, 3].choose(&mut rng).expect("non-empty");
        let mut genres: Vec<&str> = GENRES.choose_multiple(&mut rng, n_genres).copied().collect();
        genres.sort_by_key(|g| GENRES.iter().position(|x| x == g));
        let year = rng.gen_range(1930..=2000);
        let genre_string = genres.join("|");
        items.push(CatalogItem {
            item_id: k as u32 + 1,
            title: format!("{title} ({year})"),
            year,
            genres: genres.iter().map(|g| g.to_string()).collect(),
            genre_string,
        });
    }

    // Zipf-like popularity over a shuffled item order.
    let mut pop_order: Vec<usize> = (0..items.len()).collect();
    pop_order.shuffle(&mut rng);
    let mut popularity = vec![0.0f64; items.len()];
    for (rank, &idx) in pop_order.iter().enumerate() {
        popularity[idx] = 1.0 / (rank as f64 + 1.0).powf(0.9);
    }

    let age_dist = WeightedIndex::new(AGE_WEIGHTS).expect("positive weights");
    let mut users = Vec::with_capacity(params.n_users as usize);
    let mut interactions = Vec::new();
    for uid in 1..=params.n_users {
        let mut urng = rng_for("synthetic-user", &[params.seed, uid as u64]);
        let gender = if urng.gen_bool(0.72) { Gender::Male } else { Gender::Female };
        let age_code = AGE_CODES[age_dist.sample(&mut urng)];
        users.push(UserRecord {
            user_id: uid,
            gender,
            age_code,
            age_bucket: AgeBucket::from_code(age_code).expect("known code"),
            occupation_code: urng.gen_range(0..21),
            zip: format!("{:05}", urng.gen_range(0..100_000)),
        });

        let liked: Vec<&str> = GENRES.choose_multiple(&mut urng, 3).copied().collect();
        let weights: Vec<f64> = items
            .iter()
            .zip(&popularity)
            .map(|(it, p)| {
                let taste = it.genres.iter().filter(|g| liked.contains(&g.as_str())).count();
                p * (1.0 + 2.0 * taste as f64)
            })
            .collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        // Long-tailed activity.
        let span = (params.max_ratings - params.min_ratings) as f64;
        let n = params.min_ratings + (span * urng.gen::<f64>().powi(3)) as usize;
        let n = n.min(items.len());
        let mut chosen = HashSet::with_capacity(n);
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let idx = dist.sample(&mut urng);
            if chosen.insert(idx) {
                order.push(idx);
            }
        }
        let mut ts: i64 = 956_703_932 + urng.gen_range(0..20_000_000);
        for idx in order {
            ts += urng.gen_range(1..5_000);
            let it = &items[idx];
            let taste = it.genres.iter().filter(|g| liked.contains(&g.as_str())).count() as i32;
            let rating = (2 + taste + urng.gen_range(-1..=2)).clamp(1, 5) as u8;
            interactions.push(Interaction {
                user_id: uid,
                item_id: it.item_id,
                rating,
                timestamp: ts,
            });
        }
    }

    Dataset {
        catalog: Catalog::new(items),
        interactions,
        users,
        skips: SkipReport::default(),
    }
}

/// Writes `movies.dat`, `ratings.dat` and `users.dat` into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("movies.dat"), encode_latin1(&write_movies(dataset.catalog.items())))?;
    std::fs::write(dir.join("ratings.dat"), encode_latin1(&write_ratings(&dataset.interactions)))?;
    std::fs::write(dir.join("users.dat"), encode_latin1(&write_users(&dataset.users)))?;
    Ok(())
}
