//! Held-out string tasks from parameterized templates (dates, times, names,
//! phone numbers, addresses). Each template carries a witness program.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::mdp::Rng;
use crate::strings::{Example, StringTask};

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];
const FIRST: [&str; 10] = ["Mary", "John", "Ada", "Alan", "Grace", "Linus", "Ken", "Barbara", "Tim", "Edsger"];
const MIDDLE: [&str; 6] = ["Jane", "Lee", "Ann", "Ray", "Jo", "Kay"];
const LAST: [&str; 10] = ["Lennon", "Smith", "Hopper", "Turing", "Thompson", "Liskov", "Knuth", "Dijkstra", "Ritchie", "Lovelace"];
const HONORIFICS: [&str; 4] = ["Dr", "Mr", "Ms", "Prof"];
const STREETS: [&str; 8] = ["Elm", "Oak", "Main", "Pine", "Maple", "Cedar", "Hill", "Lake"];
const SUFFIXES: [&str; 4] = ["St", "Ave", "Rd", "Ln"];
const CITIES: [&str; 8] = ["Springfield", "Boston", "Austin", "Denver", "Portland", "Seattle", "Madison", "Tucson"];

/// `Const(c), Commit` for every character of `text`.
fn consts(text: &str) -> String {
    text.chars().map(|c| format!("Const({c}), Commit")).collect::<Vec<_>>().join(", ")
}

fn token(ty: &str, index: i8) -> String {
    format!("GetToken1({ty}), GetToken2({index}), Commit")
}

struct Template {
    name: &'static str,
    sample: fn(&mut Rng) -> (String, String),
    witness: fn() -> String,
}

fn digits(rng: &mut Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10))).collect()
}

const TEMPLATES: [Template; 6] = [
    Template {
        name: "date",
        sample: |rng| {
            let (m, d, y) = (rng.gen_range(1..=12), rng.gen_range(1..=28), rng.gen_range(1950..=2025));
            (format!("{m}/{d}/{y}"), format!("date: {d} mo: {m} year: {y}"))
        },
        witness: || {
            [consts("date: "), token("Number", 1), consts(" mo: "), token("Number", 0), consts(" year: "), token("Number", 2)]
                .join(", ")
        },
    },
    Template {
        name: "time",
        sample: |rng| {
            let month = MONTHS.choose(rng).unwrap();
            let (d, h, min) = (rng.gen_range(1..=28), rng.gen_range(1..=12), rng.gen_range(0..60));
            let half = if rng.gen_bool(0.5) { "AM" } else { "PM" };
            (format!("{month} {d}, {h}:{min:02} {half}"), format!("{month} {d}, approx. {h} {half}"))
        },
        witness: || {
            [
                "GetUpTo( ), Commit".to_string(),
                token("Number", 0),
                consts(", approx. "),
                token("Number", 1),
                consts(" "),
                token("AllCaps", -1),
            ]
            .join(", ")
        },
    },
    Template {
        name: "name",
        sample: |rng| {
            let hon = HONORIFICS.choose(rng).unwrap();
            let first = FIRST.choose(rng).unwrap();
            let last = LAST.choose(rng).unwrap();
            let gap = if rng.gen_bool(0.3) { "  " } else { " " };
            let given = if rng.gen_bool(0.5) {
                format!("{first} {}", MIDDLE.choose(rng).unwrap())
            } else {
                first.to_string()
            };
            (format!("{hon} {given}{gap}{last}"), format!("{last}, {given} ({hon})"))
        },
        witness: || {
            [
                token("Word", -1),
                consts(", "),
                "Span1(Word), Span2(1), Span3(Start), Span4(Word), Span5(-2), Span6(End), Commit".to_string(),
                consts(" ("),
                token("Word", 0),
                consts(")"),
            ]
            .join(", ")
        },
    },
    Template {
        name: "phone-label",
        sample: |rng| {
            let label = ["cell", "home", "work"].choose(rng).unwrap();
            let (a, b, c) = (digits(rng, 3), digits(rng, 3), digits(rng, 4));
            (format!("{label}: {a}-{b}-{c}"), format!("({a}) {b}{c} ({label})"))
        },
        witness: || {
            [
                consts("("),
                token("Number", 0),
                consts(") "),
                token("Number", 1),
                token("Number", 2),
                consts(" ("),
                token("Word", 0),
                consts(")"),
            ]
            .join(", ")
        },
    },
    Template {
        name: "area-code",
        sample: |rng| {
            let (a, b, c) = (digits(rng, 3), digits(rng, 3), digits(rng, 4));
            (format!("({a}) {b} {c}"), format!("area code: {a}, num: {b}{c}"))
        },
        witness: || {
            [consts("area code: "), token("Number", 0), consts(", num: "), token("Number", 1), token("Number", 2)]
                .join(", ")
        },
    },
    Template {
        name: "address",
        sample: |rng| {
            let no = rng.gen_range(1..=9999);
            let street = STREETS.choose(rng).unwrap();
            let suffix = SUFFIXES.choose(rng).unwrap();
            let city = CITIES.choose(rng).unwrap();
            (format!("{no} {street} {suffix}, {city}"), format!("city: {city}, no: {no}"))
        },
        witness: || [consts("city: "), token("Word", -1), consts(", no: "), token("Number", 0)].join(", "),
    },
];

/// Names of the available templates, in generation order.
pub fn template_names() -> Vec<&'static str> {
    TEMPLATES.iter().map(|t| t.name).collect()
}

/// `count` tasks cycling through the templates, each with four examples and
/// two held-out pairs.
pub fn generate_string_templates(count: usize, rng: &mut Rng) -> Vec<StringTask> {
    (0..count)
        .map(|i| {
            let template = &TEMPLATES[i % TEMPLATES.len()];
            let mut pairs = |n: usize| -> Vec<Example> {
                (0..n)
                    .map(|_| {
                        let (input, output) = (template.sample)(rng);
                        Example { input, output }
                    })
                    .collect()
            };
            let examples = pairs(4);
            let held_out = pairs(2);
            StringTask {
                id: format!("{}-{i}", template.name),
                examples,
                held_out,
                witness: Some((template.witness)()),
            }
        })
        .collect()
}
