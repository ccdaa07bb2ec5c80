//! The two chat prompts used for finding extraction and question generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Finding;

pub const SYSTEM_PROMPT: &str = "You are a medical AI assistant.";

pub const ABSTRACT_PLACEHOLDER: &str = "{abstract}";
pub const FINDINGS_PLACEHOLDER: &str = "{findings}";

/// User message for finding extraction; `{abstract}` is substituted.
pub const FINDING_TEMPLATE: &str = "Read the abstract of the following paper carefully.Identify key findings from medical perspectives step-by-step.
Here are requirements:
1. Number your findings.
2. Start the sentence with a number.
3. The finding must not include pronouns.
4. Each finding must include at least two medical entities.
5. Each finding should be capable of being explained independently, without reference to other findings.
6. Refer only to the abstract of the given paper and do not utilize your existing knowledge.

{abstract}";

/// User message for question generation; `{findings}` is substituted.
pub const QUESTION_TEMPLATE: &str = "You are a helpful assistant.
The following are key findings extracted from the abstract of a paper in PubMed.
[Finding]: {findings}.
Please write the most appropriate question for the given answer.
Here are requirements:
1. If the findings are not specific to the biomedical field, respond with 'None'.
2. The question must be a single sentence.";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptMessages {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("abstract is empty")]
pub struct EmptyAbstract;

pub fn render_finding_prompt(abstract_text: &str) -> Result<PromptMessages, EmptyAbstract> {
    if abstract_text.trim().is_empty() {
        return Err(EmptyAbstract);
    }
    Ok(PromptMessages {
        system: SYSTEM_PROMPT.to_string(),
        user: FINDING_TEMPLATE.replacen(ABSTRACT_PLACEHOLDER, abstract_text, 1),
    })
}

pub fn render_question_prompt(finding: &Finding) -> PromptMessages {
    PromptMessages {
        system: SYSTEM_PROMPT.to_string(),
        user: QUESTION_TEMPLATE.replacen(FINDINGS_PLACEHOLDER, &finding.text, 1),
    }
}

/// The text substituted into a rendered prompt, if it came from `template`.
pub fn substituted_region<'a>(
    rendered: &'a str,
    template: &str,
    placeholder: &str,
) -> Option<&'a str> {
    let (head, tail) = template.split_once(placeholder)?;
    rendered.strip_prefix(head)?.strip_suffix(tail)
}
