//! Prompt templates and their renderer.

/// Regeneration prompt. Placeholders: `{original_text}`, `{simplified_text}`,
/// `{missing_entities}`.
pub const REGENERATE_TEMPLATE: &str = include_str!("../../prompts/regenerate.txt");

/// Entity ranking prompt. Placeholders: `{original}`, `{simplified}`,
/// `{' '.join(entities)}`.
pub const RANK_TEMPLATE: &str = include_str!("../../prompts/rank.txt");

/// Default first-pass simplification prompt. Placeholder: `{original_text}`.
pub const SIMPLIFY_TEMPLATE: &str = include_str!("../../prompts/simplify.txt");

pub const REGENERATE_TEMPLATE_SHA256: &str =
    "534aa904c02e14e7186baa61190ddadc0bd512f8ae7e9d9b89abbf1ea265901d";
pub const RANK_TEMPLATE_SHA256: &str =
    "6906b8e1ea1dc0b290d7104fafcdd862617fa6f69c6fbc8af76fc77fe1295357";

const ENTITIES_JOINED: &str = "{' '.join(entities)}";

/// Substitute `{name}` placeholders in one left-to-right pass. Substituted
/// values are never rescanned, so braces inside them survive untouched.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        rest = &rest[open..];
        for (name, value) in values {
            if let Some(tail) = rest.strip_prefix(name) {
                out.push_str(value);
                rest = tail;
                continue 'scan;
            }
        }
        out.push('{');
        rest = &rest[1..];
    }
    out.push_str(rest);
    out
}

/// The regeneration prompt; `items` are joined with ", ".
pub fn regeneration_prompt(original: &str, simplified: &str, items: &[String]) -> String {
    render(
        REGENERATE_TEMPLATE,
        &[
            ("{original_text}", original),
            ("{simplified_text}", simplified),
            ("{missing_entities}", &items.join(", ")),
        ],
    )
}

/// The ranking prompt; `entities` are joined with single spaces.
pub fn ranking_prompt(original: &str, simplified: &str, entities: &[String]) -> String {
    render(
        RANK_TEMPLATE,
        &[
            ("{original}", original),
            ("{simplified}", simplified),
            (ENTITIES_JOINED, &entities.join(" ")),
        ],
    )
}

pub fn simplification_prompt(template: &str, original: &str) -> String {
    render(template, &[("{original_text}", original)])
}
