//! Versioned prompt templates. Each begins with a `### lexverify:<task> v<N>`
//! line and carries its inputs in `<<<name … >>>` blocks, which is what the
//! mock port reads back.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Template {
    pub task: &'static str,
    pub version: u32,
    pub text: &'static str,
}

pub const GEN_QUERIES: Template = Template { task: "gen_queries", version: 1, text: include_str!("../prompts/gen_queries.v1.txt") };
pub const FILTER_USEFUL: Template =
    Template { task: "filter_useful", version: 1, text: include_str!("../prompts/filter_useful.v1.txt") };
pub const SYNTHESIZE: Template = Template { task: "synthesize", version: 1, text: include_str!("../prompts/synthesize.v1.txt") };
pub const REPAIR: Template = Template { task: "repair", version: 1, text: include_str!("../prompts/repair.v1.txt") };

pub const ALL: [Template; 4] = [GEN_QUERIES, FILTER_USEFUL, SYNTHESIZE, REPAIR];

impl Template {
    /// Substitutes `{{name}}` placeholders. Values are inserted verbatim.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = self.text.to_string();
        for (name, value) in values {
            out = out.replace(&format!("{{{{{name}}}}}"), value);
        }
        out
    }
}

/// Task name and version from a rendered prompt's first line.
pub fn task_of(prompt: &str) -> Option<(&str, u32)> {
    let rest = prompt.lines().next()?.strip_prefix("### lexverify:")?;
    let (task, version) = rest.split_once(" v")?;
    Some((task, version.trim().parse().ok()?))
}

/// Contents of the `<<<name` … `>>>` block.
pub fn block<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
    let open = format!("<<<{name}\n");
    let start = prompt.find(&open)? + open.len();
    let len = prompt[start..].find("\n>>>")?;
    Some(&prompt[start..start + len])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_announce_their_task() {
        for t in ALL {
            assert_eq!(task_of(t.text), Some((t.task, t.version)));
            assert!(!t.text.contains('\u{2014}'));
        }
    }

    #[test]
    fn blocks_round_trip() {
        let p = GEN_QUERIES.render(&[("article", "{\"a\": 1}\nline two")]);
        assert_eq!(block(&p, "article"), Some("{\"a\": 1}\nline two"));
        assert_eq!(block(&p, "missing"), None);
    }
}
