use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const OBJECTS: [&str; 10] = [
    "Chair", "Bowl", "Plate", "Nail", "Bucket", "Backpack", "Book", "Ball", "Clock", "Donut",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeCategory {
    Texture,
    Color,
    Style,
    Pattern,
}

impl AttributeCategory {
    pub const ALL: [AttributeCategory; 4] = [
        AttributeCategory::Texture,
        AttributeCategory::Color,
        AttributeCategory::Style,
        AttributeCategory::Pattern,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeCategory::Texture => "texture",
            AttributeCategory::Color => "color",
            AttributeCategory::Style => "style",
            AttributeCategory::Pattern => "pattern",
        }
    }

    pub fn members(self) -> &'static [&'static str] {
        match self {
            AttributeCategory::Texture => &["Steel", "Wood", "Glass", "Plastic", "Wool", "Cotton", "Silk"],
            AttributeCategory::Color => &["Verdant", "Red", "Azure", "Green", "Gold", "Purple", "Black", "Pink"],
            AttributeCategory::Style => &[
                "Vintage",
                "Modern",
                "Abstract",
                "Realistic",
                "Cartoon",
                "Surreal",
                "Expressionist",
                "Futuristic",
                "Retro",
            ],
            AttributeCategory::Pattern => &[
                "Striped",
                "Polka Dot",
                "Plaid",
                "Paisley",
                "Floral",
                "Geometric",
                "Abstract",
                "Animal Print",
                "Checkered",
                "Herringbone",
            ],
        }
    }
}

impl fmt::Display for AttributeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `"{attribute} {object}"` or a bare attribute, lowercased.
pub fn prompt_for(attribute: &str, object: Option<&str>) -> String {
    match object {
        Some(o) => format!("{attribute} {o}").to_lowercase(),
        None => attribute.to_lowercase(),
    }
}

/// Categories that list `attribute` (case-insensitive).
pub fn categories_of(attribute: &str) -> Vec<AttributeCategory> {
    AttributeCategory::ALL
        .into_iter()
        .filter(|c| c.members().iter().any(|m| m.eq_ignore_ascii_case(attribute)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub attribute: String,
    /// More than one entry when the attribute is listed in several categories.
    pub categories: Vec<AttributeCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPairs {
    pub category: AttributeCategory,
    pub attributes: Vec<String>,
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptGrid {
    pub objects: Vec<String>,
    pub categories: Vec<CategoryPairs>,
    /// Every distinct prompt the bridge must encode.
    pub prompts: Vec<PromptEntry>,
}

pub fn build_prompt_grid() -> PromptGrid {
    let objects: Vec<String> = OBJECTS.iter().map(|o| o.to_lowercase()).collect();
    let categories = AttributeCategory::ALL
        .into_iter()
        .map(|c| {
            let attributes: Vec<String> = c.members().iter().map(|a| a.to_lowercase()).collect();
            let mut pairs = Vec::new();
            for i in 0..attributes.len() {
                for j in i + 1..attributes.len() {
                    pairs.push([attributes[i].clone(), attributes[j].clone()]);
                }
            }
            CategoryPairs {
                category: c,
                attributes,
                pairs,
            }
        })
        .collect::<Vec<_>>();

    let mut prompts: Vec<PromptEntry> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut push = |prompts: &mut Vec<PromptEntry>, entry: PromptEntry| match index.get(&entry.prompt) {
        Some(&i) => {
            for c in entry.categories {
                if !prompts[i].categories.contains(&c) {
                    prompts[i].categories.push(c);
                }
            }
        }
        None => {
            index.insert(entry.prompt.clone(), prompts.len());
            prompts.push(entry);
        }
    };
    for cat in &categories {
        for attr in &cat.attributes {
            push(
                &mut prompts,
                PromptEntry {
                    prompt: prompt_for(attr, None),
                    object: None,
                    attribute: attr.clone(),
                    categories: vec![cat.category],
                },
            );
            for obj in &objects {
                push(
                    &mut prompts,
                    PromptEntry {
                        prompt: prompt_for(attr, Some(obj)),
                        object: Some(obj.clone()),
                        attribute: attr.clone(),
                        categories: vec![cat.category],
                    },
                );
            }
        }
    }
    PromptGrid {
        objects,
        categories,
        prompts,
    }
}
