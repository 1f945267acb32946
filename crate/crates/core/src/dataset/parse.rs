use super::{
    strip_year_suffix, AgeBucket, Catalog, CatalogItem, DataError, Gender, Interaction,
    SkipReport, UserRecord,
};
use std::fmt::Write as _;
use std::path::Path;

const SEP: &str = "::";

/// Decodes Latin-1 bytes. Every byte maps to the code point of the same value,
/// so decoding cannot fail.
pub fn decode_latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

/// Encodes text as Latin-1. Characters above U+00FF are written as `\u{XXXX}`.
pub fn encode_latin1(text: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(text.len());
    for c in text.chars() {
        let cp = c as u32;
        if cp <= 0xFF {
            out.push(cp as u8);
        } else {
            out.extend_from_slice(format!("\\u{{{cp:04X}}}").as_bytes());
        }
    }
    out
}

fn read_latin1(path: &Path) -> Result<String, DataError> {
    std::fs::read(path)
        .map(|b| decode_latin1(&b))
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Non-blank lines with their 1-based line numbers. A trailing `\r` is dropped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_movies(path: &Path) -> Result<(Vec<CatalogItem>, SkipReport), DataError> {
    let text = read_latin1(path)?;
    Ok(parse_movies_str(&text, &file_label(path)))
}

pub fn parse_movies_str(text: &str, file: &str) -> (Vec<CatalogItem>, SkipReport) {
    let mut items = Vec::new();
    let mut skips = SkipReport::default();
    let mut seen = std::collections::HashSet::new();
    for (line_no, line) in lines(text) {
        match parse_movie_line(line) {
            Ok(item) => {
                if seen.insert(item.item_id) {
                    items.push(item);
                } else {
                    skips.push(file, line_no, format!("duplicate item id {}", item.item_id));
                }
            }
            Err(reason) => skips.push(file, line_no, reason),
        }
    }
    (items, skips)
}

fn parse_movie_line(line: &str) -> Result<CatalogItem, String> {
    // Titles may not contain the separator, but split from both ends anyway so
    // that a stray `::` inside a title is not silently misread as genres.
    let (id_part, rest) = line
        .split_once(SEP)
        .ok_or_else(|| "expected 3 fields".to_string())?;
    let (title, genre_string) = rest
        .rsplit_once(SEP)
        .ok_or_else(|| "expected 3 fields".to_string())?;
    let item_id: u32 = id_part
        .trim()
        .parse()
        .map_err(|_| format!("bad movie id {id_part:?}"))?;
    if item_id == 0 {
        return Err("movie id must be positive".into());
    }
    let (_, year) = strip_year_suffix(title);
    let year = year.ok_or_else(|| format!("no trailing (YYYY) in title {title:?}"))?;
    if !(1900..=2100).contains(&year) {
        return Err(format!("year {year} out of range"));
    }
    let genres: Vec<String> = genre_string
        .split('|')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(String::from)
        .collect();
    if genres.is_empty() {
        return Err("empty genre field".into());
    }
    Ok(CatalogItem {
        item_id,
        title: title.to_string(),
        year,
        genres,
        genre_string: genre_string.to_string(),
    })
}

pub fn parse_ratings(path: &Path) -> Result<(Vec<Interaction>, SkipReport), DataError> {
    let text = read_latin1(path)?;
    Ok(parse_ratings_str(&text, &file_label(path)))
}

pub fn parse_ratings_str(text: &str, file: &str) -> (Vec<Interaction>, SkipReport) {
    let (numbered, skips) = parse_ratings_numbered(text, file);
    (numbered.into_iter().map(|(_, i)| i).collect(), skips)
}

fn parse_ratings_numbered(text: &str, file: &str) -> (Vec<(usize, Interaction)>, SkipReport) {
    let mut out = Vec::new();
    let mut skips = SkipReport::default();
    for (line_no, line) in lines(text) {
        match parse_rating_line(line) {
            Ok(i) => out.push((line_no, i)),
            Err(reason) => skips.push(file, line_no, reason),
        }
    }
    (out, skips)
}

fn parse_rating_line(line: &str) -> Result<Interaction, String> {
    let fields: Vec<&str> = line.split(SEP).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let user_id: u32 = fields[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad user id {:?}", fields[0]))?;
    let item_id: u32 = fields[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad movie id {:?}", fields[1]))?;
    let rating: i64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad rating {:?}", fields[2]))?;
    let timestamp: i64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", fields[3]))?;
    if user_id == 0 || item_id == 0 {
        return Err("ids must be positive".into());
    }
    if !(1..=5).contains(&rating) {
        return Err(format!("rating {rating} outside [1,5]"));
    }
    if timestamp <= 0 {
        return Err(format!("non-positive timestamp {timestamp}"));
    }
    Ok(Interaction {
        user_id,
        item_id,
        rating: rating as u8,
        timestamp,
    })
}

pub fn parse_users(path: &Path) -> Result<(Vec<UserRecord>, SkipReport), DataError> {
    let text = read_latin1(path)?;
    Ok(parse_users_str(&text, &file_label(path)))
}

pub fn parse_users_str(text: &str, file: &str) -> (Vec<UserRecord>, SkipReport) {
    let mut out = Vec::new();
    let mut skips = SkipReport::default();
    for (line_no, line) in lines(text) {
        match parse_user_line(line) {
            Ok(u) => out.push(u),
            Err(reason) => skips.push(file, line_no, reason),
        }
    }
    (out, skips)
}

fn parse_user_line(line: &str) -> Result<UserRecord, String> {
    let fields: Vec<&str> = line.split(SEP).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let user_id: u32 = fields[0]
        .trim()
        .parse()
        .map_err(|_| format!("bad user id {:?}", fields[0]))?;
    if user_id == 0 {
        return Err("user id must be positive".into());
    }
    let gender = match fields[1].trim() {
        "M" => Gender::Male,
        "F" => Gender::Female,
        other => return Err(format!("unknown gender {other:?}")),
    };
    let age_code: u8 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad age code {:?}", fields[2]))?;
    let age_bucket =
        AgeBucket::from_code(age_code).ok_or_else(|| format!("unknown age code {age_code}"))?;
    let occupation_code: u32 = fields[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad occupation {:?}", fields[3]))?;
    Ok(UserRecord {
        user_id,
        gender,
        age_code,
        age_bucket,
        occupation_code,
        zip: fields[4].to_string(),
    })
}

pub fn write_movies(items: &[CatalogItem]) -> String {
    let mut s = String::new();
    for i in items {
        let _ = writeln!(s, "{}::{}::{}", i.item_id, i.title, i.genre_string);
    }
    s
}

pub fn write_ratings(interactions: &[Interaction]) -> String {
    let mut s = String::new();
    for i in interactions {
        let _ = writeln!(
            s,
            "{}::{}::{}::{}",
            i.user_id, i.item_id, i.rating, i.timestamp
        );
    }
    s
}

pub fn write_users(users: &[UserRecord]) -> String {
    let mut s = String::new();
    for u in users {
        let g = match u.gender {
            Gender::Male => "M",
            Gender::Female => "F",
        };
        let _ = writeln!(
            s,
            "{}::{}::{}::{}::{}",
            u.user_id, g, u.age_code, u.occupation_code, u.zip
        );
    }
    s
}

/// A fully ingested dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: Catalog,
    pub interactions: Vec<Interaction>,
    pub users: Vec<UserRecord>,
    pub skips: SkipReport,
}

/// Loads `movies.dat`, `ratings.dat` and `users.dat` from `dir`.
///
/// Ratings that reference an unknown movie or user are dropped and reported.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let movies_path = dir.join("movies.dat");
    let ratings_path = dir.join("ratings.dat");
    let users_path = dir.join("users.dat");
    let (items, mut skips) = parse_movies(&movies_path)?;
    let (users, user_skips) = parse_users(&users_path)?;
    let text = read_latin1(&ratings_path)?;
    let label = file_label(&ratings_path);
    let (raw, rating_skips) = parse_ratings_numbered(&text, &label);
    skips.extend(user_skips);
    skips.extend(rating_skips);

    let catalog = Catalog::new(items);
    let known_users: std::collections::HashSet<u32> = users.iter().map(|u| u.user_id).collect();
    let mut interactions = Vec::with_capacity(raw.len());
    for (line_no, i) in raw {
        if catalog.get(i.item_id).is_none() {
            skips.push(&label, line_no, format!("unknown movie id {}", i.item_id));
        } else if !known_users.contains(&i.user_id) {
            skips.push(&label, line_no, format!("unknown user id {}", i.user_id));
        } else {
            interactions.push(i);
        }
    }
    Ok(Dataset {
        catalog,
        interactions,
        users,
        skips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn movie_line_examples() {
        let (items, skips) = parse_movies_str(
            "1::Toy Story (1995)::Animation|Children's|Comedy\n2571::Matrix, The (1999)::Action|Sci-Fi|Thriller\n",
            "movies.dat",
        );
        assert!(skips.is_empty());
        assert_eq!(items[0].item_id, 1);
        assert_eq!(items[0].title, "Toy Story (1995)");
        assert_eq!(items[0].year, 1995);
        assert_eq!(items[0].genres, ["Animation", "Children's", "Comedy"]);
        assert_eq!(items[1].year, 1999);
        assert_eq!(items[1].genres.len(), 3);
        assert_eq!(items[1].bare_title(), "Matrix, The");
    }

    #[test]
    fn malformed_movie_lines_are_reported_and_parsing_continues() {
        let text = "x::Bad (1990)::Drama\n5::No Year::Drama\n6::Ok (1990)::\n7::Fine (1990)::Drama\n8::Future (2999)::Drama\n";
        let (items, skips) = parse_movies_str(text, "movies.dat");
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].item_id, 7);
        let lines: Vec<usize> = skips.entries.iter().map(|e| e.line_no).collect();
        assert_eq!(lines, [1, 2, 3, 5]);
    }

    #[test]
    fn rating_line_examples() {
        let (r, skips) = parse_ratings_str("1::1193::5::978300760\n", "ratings.dat");
        assert!(skips.is_empty());
        assert_eq!(
            r,
            [Interaction {
                user_id: 1,
                item_id: 1193,
                rating: 5,
                timestamp: 978300760
            }]
        );
        let (r, skips) = parse_ratings_str("", "ratings.dat");
        assert!(r.is_empty() && skips.is_empty());
    }

    #[test]
    fn out_of_range_rating_is_skipped() {
        let (r, skips) = parse_ratings_str("1::1::6::10\n1::2::0::10\n1::3::4::10\n", "ratings.dat");
        assert_eq!(r.len(), 1);
        assert_eq!(skips.len(), 2);
        assert!(skips.entries[0].reason.contains("outside"));
    }

    #[test]
    fn user_line_examples() {
        let (u, skips) = parse_users_str("1::F::1::10::48067\n2::M::56::16::70072\n3::M::30::1::1\n", "users.dat");
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].gender, Gender::Female);
        assert_eq!(u[0].age_bucket, AgeBucket::Teen);
        assert_eq!(u[1].gender, Gender::Male);
        assert_eq!(u[1].age_bucket, AgeBucket::Adult);
        assert_eq!(skips.len(), 1);
        assert_eq!(skips.entries[0].line_no, 3);
    }

    #[test]
    fn skip_report_is_jsonl() {
        let mut s = SkipReport::default();
        s.push("ratings.dat", 4, "bad");
        assert_eq!(
            s.to_jsonl(),
            "{\"file\":\"ratings.dat\",\"line_no\":4,\"reason\":\"bad\"}\n"
        );
    }

    #[test]
    fn latin1_decoding() {
        assert_eq!(decode_latin1(b"L\xe9on (1994)"), "Léon (1994)");
        assert_eq!(encode_latin1("Léon"), b"L\xe9on");
        assert_eq!(encode_latin1("a\u{2013}b"), b"a\\u{2013}b");
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = parse_movies(Path::new("/definitely/not/here/movies.dat")).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }

    fn title_strategy() -> impl Strategy<Value = String> {
        "[A-Za-z0-9 ,'&!.\u{e0}-\u{ff}-]{1,30}".prop_filter("no separator", |s| {
            !s.contains("::") && !s.trim().is_empty() && s.trim() == s
        })
    }

    proptest! {
        #[test]
        fn movies_round_trip_bytes(
            rows in proptest::collection::vec(
                (1u32..100_000, title_strategy(), 1900i32..2100,
                 proptest::collection::vec("[A-Z][a-z'-]{2,10}", 1..4)),
                0..20)
        ) {
            let mut seen = std::collections::HashSet::new();
            let items: Vec<CatalogItem> = rows.into_iter()
                .filter(|(id, ..)| seen.insert(*id))
                .map(|(id, t, y, g)| CatalogItem {
                    item_id: id,
                    title: format!("{t} ({y})"),
                    year: y,
                    genre_string: g.join("|"),
                    genres: g,
                })
                .collect();
            let bytes = encode_latin1(&write_movies(&items));
            let (parsed, skips) = parse_movies_str(&decode_latin1(&bytes), "m");
            prop_assert!(skips.is_empty());
            prop_assert_eq!(&parsed, &items);
            prop_assert_eq!(encode_latin1(&write_movies(&parsed)), bytes);
        }

        #[test]
        fn ratings_round_trip_bytes(
            rows in proptest::collection::vec((1u32..7000, 1u32..4000, 1u8..=5, 1i64..2_000_000_000), 0..50)
        ) {
            let ints: Vec<Interaction> = rows.into_iter()
                .map(|(u, i, r, t)| Interaction { user_id: u, item_id: i, rating: r, timestamp: t })
                .collect();
            let text = write_ratings(&ints);
            let (parsed, skips) = parse_ratings_str(&text, "r");
            prop_assert!(skips.is_empty());
            prop_assert_eq!(write_ratings(&parsed), text);
        }
    }
}
