"""Prompt templates for the four annotation tasks.

Every template follows the same anatomy: a role preamble, explicit task
rules with positive/negative examples, and the record's fields appended in
a fixed order.  Rendering is purely textual and deterministic: the same
record always produces byte-identical prompts, which is what makes the
response cache and scripted fixtures work.  Wording here is original to
this project.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    task: str
    role: str
    rules: tuple[str, ...]
    examples: tuple[str, ...]
    required_fields: tuple[str, ...]
    optional_fields: tuple[str, ...] = ()
    output_format: str = ""

    def render(self, record: dict) -> str:
        missing = [f for f in self.required_fields if record.get(f) in (None, "")]
        if missing:
            raise MissingFieldError(self.task, missing)
        parts = [self.role, "", "Rules:"]
        parts += [f"{i}. {rule}" for i, rule in enumerate(self.rules, start=1)]
        if self.examples:
            parts += ["", "Examples:"]
            parts += [f"- {ex}" for ex in self.examples]
        parts += ["", self.output_format, "", "Record:"]
        for name in (*self.required_fields, *self.optional_fields):
            value = record.get(name)
            if value is not None:
                parts.append(f"{name}: {value}")
        return "\n".join(parts)


class MissingFieldError(LookupError):
    def __init__(self, task: str, fields: list[str]):
        self.task = task
        self.fields = fields
        super().__init__(f"task {task}: missing {', '.join(fields)}")


_EXTRACT = PromptTemplate(
    template_id="extract_pair_v1",
    task="extract_pair",
    role=(
        "You are a careful bilingual annotator working on social-media comments in "
        "which Chinese users propose Chinese names for foreign newcomers. Extract "
        "every proposed Chinese name and, when stated, the commenter's explanation "
        "for it."
    ),
    rules=(
        "Return every (name, explanation) pair found in the comment; a comment may contain several.",
        "If a name is given with no stated reason, set explanation to null.",
        "If the comment proposes no name at all, return an empty list.",
        "Never return a single isolated character as a name; such entries are invalid.",
        "Never return a purely foreign name (no Han characters) as the extracted name.",
        "Names that are merely mentioned but not proposed for the newcomer are not extractions.",
        "Do not copy decorative symbols or trailing chatter into the explanation.",
        "Unusual or playful coinages still count as names when clearly proposed as one.",
    ),
    examples=(
        'comment "叫你李华吧，课本里的老朋友" -> [{"name": "李华", "explanation": "课本里的老朋友"}]',
        'comment "好可爱！" -> []',
        'comment "晴" -> []  (single character, invalid)',
    ),
    required_fields=("text_clean",),
    optional_fields=("foreign_name",),
    output_format=(
        'Answer with JSON only: a list of objects, each {"name": string|null, '
        '"explanation": string|null}.'
    ),
)

_SEMANTIC = PromptTemplate(
    template_id="semantic_explain_v1",
    task="semantic_explain",
    role=(
        "You are a name interpreter with deep knowledge of Chinese internet culture "
        "and naming practice, writing in a register close to online discourse. "
        "Explain what the proposed Chinese name means and evokes."
    ),
    rules=(
        "State only factual or descriptive content; avoid personal opinions about the name.",
        "Name the concrete source of any cultural reference or meme instead of calling it 'cultural'.",
        "Acknowledge vulgar or satirical intent neutrally when it is present.",
        "Ground every claim in genuine usage; never invent sources.",
        "Omit filler such as 'this name has no special meaning'.",
        "Prefer widely recognizable associations over obscure ones.",
        "Fold the commenter's own explanation into the output when one exists.",
        "Read the name in its social-media context, not as a dictionary item.",
        "If no reasonable association exists, say so rather than forcing one.",
    ),
    examples=(
        '"狗蛋" -> 乡土味十足的小名，来自农村给孩子取"贱名"求平安的传统。',
    ),
    required_fields=("name",),
    optional_fields=("explanation",),
    output_format='Answer with JSON only: {"explanation": string}.',
)

_VISUAL = PromptTemplate(
    template_id="visual_classify_v1",
    task="visual_classify",
    role=(
        "You are an annotator deciding whether a proposed Chinese name is grounded "
        "in the poster's photo, using a short textual description of that photo."
    ),
    rules=(
        "First propose candidate visual links from the name and its explanation, then verify each against the photo description.",
        "Accept only clear, explicit cues from the description; reject subtle or speculative links.",
        "If several cues fit, pick the single most salient category and cite the supporting phrase.",
        "Categories: VC1 demeanor, VC2 facial features, VC3 hair, VC4 background, VC5 skin tone, VC6 facial expressions, VC7 clothing and accessories.",
        "If no cue supports a link, answer null (no visual association).",
        "Re-check the chosen category against its definition before answering.",
    ),
    examples=(
        'name "卷毛", description "brown curly hair" -> {"label": "VC3"}',
        'name "李华", description "white wall background" -> {"label": null}',
    ),
    required_fields=("name", "image_description"),
    optional_fields=("explanation",),
    output_format='Answer with JSON only: {"label": "VC1".."VC7" or null}.',
)

_PHONETIC = PromptTemplate(
    template_id="phonetic_classify_v1",
    task="phonetic_classify",
    role=(
        "You are a phonetics expert fluent in Chinese Pinyin and English phonology, "
        "deciding how a proposed Chinese name relates to the poster's foreign name."
    ),
    rules=(
        "Convert the Chinese name to Pinyin and compare its syllables with the foreign name, allowing reasonable variation across phonetic systems.",
        "PC1 full homophony: the whole name closely tracks the foreign name's sound.",
        "PC2 partial homophony: one meaningful component (surname or single character) matches part of the sound.",
        "PC3 meaning association: no sound match, but the name maps the foreign name's meaning or imagery.",
        "If none of these hold, answer null (no relation).",
        "Keep the judgment consistent with the available evidence; never fabricate a link.",
    ),
    examples=(
        'foreign "Stefan", name "史德风" -> {"label": "PC1"}',
        'foreign "Ash", name "余烬" -> {"label": "PC3"}',
        'foreign "Daniel", name "翠花" -> {"label": null}',
    ),
    required_fields=("name", "foreign_name"),
    optional_fields=("explanation",),
    output_format='Answer with JSON only: {"label": "PC1"|"PC2"|"PC3" or null}.',
)

TEMPLATES: dict[str, PromptTemplate] = {
    t.template_id: t for t in (_EXTRACT, _SEMANTIC, _VISUAL, _PHONETIC)
}

DEFAULT_TEMPLATE_FOR_TASK = {
    "extract_pair": "extract_pair_v1",
    "semantic_explain": "semantic_explain_v1",
    "visual_classify": "visual_classify_v1",
    "phonetic_classify": "phonetic_classify_v1",
}

REPAIR_INSTRUCTION = (
    "\n\nYour previous reply was not valid JSON in the required shape. "
    "Answer again with JSON only, exactly in the format requested above."
)
