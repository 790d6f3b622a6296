//! Word tables for scenes and caption templates.

use super::scene::RelationKind;

pub const VOCAB_VERSION: &str = "dgvocab1";

pub const CATEGORIES: [&str; 10] = [
    "building", "tree", "pond", "field", "road", "car", "ship", "plane", "tank", "court",
];

/// Scene class named after the primary object's category.
pub const SCENE_CLASSES: [&str; 10] = [
    "residential area",
    "forest",
    "park",
    "farmland",
    "highway",
    "parking lot",
    "harbor",
    "airport",
    "industrial area",
    "sports center",
];

/// Categories that may enclose another object.
pub const SURROUNDING: [usize; 3] = [1, 2, 3];

pub const ATTRIBUTES: [&str; 8] = [
    "white", "red", "gray", "green", "blue", "brown", "yellow", "black",
];

pub const BACKGROUNDS: [&str; 3] = ["bare land", "grass", "sand"];

pub const COUNT_WORDS: [&str; 4] = ["no", "a", "two", "three"];

pub const POSITIONS: [[&str; 3]; 3] = [
    ["upper left", "top", "upper right"],
    ["left", "center", "right"],
    ["lower left", "bottom", "lower right"],
];

pub const ZERO_SHOT_TEMPLATE: &str = "a satellite photo of {class_name}";

/// Content-free sentences used to pad long captions.
pub const LONG_FILLERS: [&str; 12] = [
    "the image is clear and the colors look natural .",
    "no clouds or shadows cover the scene .",
    "the layout of the scene looks orderly .",
    "the edges of the objects are sharp and easy to see .",
    "the photo was taken in good weather .",
    "the overall scene appears calm and quiet .",
    "the ground texture is visible in many places .",
    "the scene is captured from a high altitude .",
    "the lighting is even across the whole image .",
    "there are no people visible in the image .",
    "the resolution is high enough to see small details .",
    "the colors of the scene are bright and rich .",
];

/// Content-free sentences used to pad short captions.
pub const SHORT_FILLERS: [&str; 6] = [
    "the image is clear .",
    "the photo was taken in good weather .",
    "it is a typical remote sensing image .",
    "the scene is captured from a high altitude .",
    "the lighting is even .",
    "the colors look natural .",
];

pub fn plural(category: &str) -> String {
    format!("{category}s")
}

pub fn article(next_word: &str) -> &'static str {
    if next_word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

pub fn relation_phrase(kind: RelationKind) -> &'static str {
    match kind {
        RelationKind::LeftOf => "to the left of",
        RelationKind::RightOf => "to the right of",
        RelationKind::Above => "above",
        RelationKind::Below => "below",
        RelationKind::Between => "between",
        RelationKind::SurroundedBy => "surrounded by",
    }
}

const TEMPLATE_WORDS: &str = "this is a an image of the background mostly there are in \
    part and it they satellite photo with is are covers cover area small large . , \
    to left right above below between surrounded by scene";

/// Every word any template can emit, first-seen order, no duplicates.
pub fn all_words() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |phrase: &str| {
        for w in phrase.split_whitespace() {
            if !out.iter().any(|x| x == w) {
                out.push(w.to_string());
            }
        }
    };
    add(TEMPLATE_WORDS);
    add(&ZERO_SHOT_TEMPLATE.replace("{class_name}", ""));
    for c in CATEGORIES {
        add(c);
        add(&plural(c));
    }
    SCENE_CLASSES.iter().for_each(|s| add(s));
    ATTRIBUTES.iter().for_each(|s| add(s));
    BACKGROUNDS.iter().for_each(|s| add(s));
    COUNT_WORDS.iter().for_each(|s| add(s));
    POSITIONS.iter().flatten().for_each(|s| add(s));
    LONG_FILLERS.iter().for_each(|s| add(s));
    SHORT_FILLERS.iter().for_each(|s| add(s));
    out
}
