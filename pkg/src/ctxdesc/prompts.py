"""Versioned prompt catalog for every stage of the description chain.

One record per stage: tag, prompt template, and the output shape the stage
must produce. Transcript fixtures are keyed by the same stage tags, so
prompt wording can evolve (with a version bump) without breaking replay
order. Templates use string.Template slots ($url, $placeholder_map_json)
because several prompts contain literal JSON braces.
"""

from __future__ import annotations

from dataclasses import dataclass
from string import Template
from types import MappingProxyType

CATALOG_VERSION = "1"

# Stage tags, in canonical pipeline order.
STAGE_PURPOSE = "purpose"
STAGE_INITIAL_DESCRIPTION = "initial_description"
STAGE_VCW_TEXT = "vcw_text"
STAGE_VCW_CONTEXT = "vcw_context"
STAGE_MERGE_VCW = "merge_vcw"
STAGE_FILTER_VCW = "filter_vcw"
STAGE_ASSIGN_PLACEHOLDERS = "assign_placeholders"
STAGE_LONG_CA = "long_ca"
STAGE_RESTORE_NAMES = "restore_names"
STAGE_SELECT_BEST = "select_best"
STAGE_SHORTEN_CA = "shorten_ca"
STAGE_CF_LONG = "cf_long"
STAGE_CF_SHORT = "cf_short"
STAGE_HTML_LONG = "html_long"
STAGE_HTML_SHORT = "html_short"

# Output shapes a stage can demand.
OUT_OBJECT = "object"
OUT_ARRAY = "array"
OUT_TEXT = "text"
OUT_INDEX = "index"


@dataclass(frozen=True)
class PromptSpec:
    stage: str
    template: str
    output: str


_SHORTEN_BASELINE = "Refine the image description to make it more concise."

_SPECS = (
    PromptSpec(
        stage=STAGE_PURPOSE,
        template=(
            "Identify the domain of the web link, determine the category of the webpage in "
            "[ecommerce, news, educational, social media, entertainment, lifestyle, dating, "
            "job portals, or services] and the purpose of the website in short. Return the "
            "result only in a JSON format of '{\"website\": \"name of the website\", "
            "\"category\": \"name of category\", \"purpose\": \"purpose of the website\" }' "
            "with no additional text.\n\nWeb link: $url"
        ),
        output=OUT_OBJECT,
    ),
    PromptSpec(
        stage=STAGE_INITIAL_DESCRIPTION,
        template=(
            "Describe the visual details of the element(s) in focus in the image for blind "
            "and low-vision users to reinforce the purpose of the webpage.\n\n"
            "Webpage purpose: $purpose"
        ),
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_VCW_TEXT,
        template=(
            "Identify all the visually concrete words and their attributes from the text. "
            "Verify if the visually concrete words can be associated with elements in the "
            "image. Return the result only in an array of JSON, in the format of "
            "[{vcw: \"visually concrete word\", element: \"element associated with the "
            "visually concrete word\"}] with no additional text such as starting with "
            "'''json'''. If no visually concrete words are present, return an empty JSON."
            "\n\nText: $source_text"
        ),
        output=OUT_ARRAY,
    ),
    PromptSpec(
        stage=STAGE_VCW_CONTEXT,
        template=(
            "Identify all the visually concrete words and their associated elements from the "
            "\"text\" field in the given JSON. If there are people/named entities present in "
            "the image, obtain their names from the highest \"final_score\" in the JSON. "
            "Verify if the visually concrete words can be associated with elements in the "
            "image. The score of the visually concrete word is the \"final_score\" field "
            "from which it is derived. Return the result only in JSON object in format of "
            "'[{vcw: \"visually concrete word\", element: \"element associated with the "
            "visually concrete word\", score: \"final_score\"}]' with no additional text. "
            "If no visually concrete words are present, return an empty JSON."
        ),
        output=OUT_ARRAY,
    ),
    PromptSpec(
        stage=STAGE_MERGE_VCW,
        template=(
            "Combine the visually concrete words that are associated with same elements, "
            "retain the score for the element if any entry for that element has a score. "
            "Keep all the named entities used to describe the elements. Return the result "
            "only in an array of JSON, with no additional text such as starting with "
            "'''json'''. If no similar elements are present, return the original JSON."
        ),
        output=OUT_ARRAY,
    ),
    PromptSpec(
        stage=STAGE_FILTER_VCW,
        template=(
            "Generate a new JSON object from the given JSON by discarding entries whose "
            "\"element\" field is \"none\" or \"not present\". Return only the JSON with no "
            "additional text such as starting with '''json'''"
        ),
        output=OUT_ARRAY,
    ),
    PromptSpec(
        stage=STAGE_ASSIGN_PLACEHOLDERS,
        template=(
            "If the names of person/people are known, only then assign {M, N, O, P...} "
            "(depending on the number of people in the image) to every person and return a "
            "JSON in the following structure: [{\"placeholder\": letter assigned to the "
            "name}, {\"name\": name of the person replaced}] with no additional texts. "
            "If there are no people, return an empty JSON."
        ),
        output=OUT_ARRAY,
    ),
    PromptSpec(
        stage=STAGE_LONG_CA,
        template=(
            "Describe the elements in focus in the image and their visual details for blind "
            "and low-vision users using all their visually concrete words (vcw) from the "
            "given JSON. If there is/are person/people in the image, refer to them in the "
            "description with the placeholder letters as given. If there are no people in "
            "the image or their names are not present in the JSON, return the image "
            "description as is. $placeholder_map_json Use the \"scores\" field to determine "
            "the priority of elements in the image to describe, higher score means higher "
            "priority to describe the element with its details. The goal is to make the "
            "image description specific and relevant. Return only the image description."
        ),
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_RESTORE_NAMES,
        template=(
            "If there is/are person/people in the image, replace the \"placeholder\" letters "
            "in the description with the corresponding \"name\" from the JSON. Ensure that "
            "the description is semantically and grammatically correct and return only the "
            "description. If there are no people in the image or their names are not "
            "present in the JSON, return the image description as is.\n\n"
            "Description: $description"
        ),
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_SELECT_BEST,
        template=(
            "Choose the best description in [long context-aware descriptions] array based "
            "on highest number of visual details, named entities such as names of people, "
            "location, objects, and objectivity. Return only the index number of the "
            "description once selected."
        ),
        output=OUT_INDEX,
    ),
    PromptSpec(
        stage=STAGE_SHORTEN_CA,
        template=(
            "Refine the image description to make it more concise. If there is/are "
            "person/people in the image, replace the \"placeholder\" letters in the "
            "description with the corresponding \"name\" from the JSON. Ensure that the "
            "description is semantically and grammatically correct and return only the "
            "description. If there are no people in the image or their names are not "
            "present in the JSON, return the image description as is.\n\n"
            "Description: $description"
        ),
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_CF_LONG,
        template="Describe the image for blind and low-vision users.",
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_CF_SHORT,
        template=_SHORTEN_BASELINE + "\n\nDescription: $description",
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_HTML_LONG,
        template="Describe the image for blind and low-vision users using the context.",
        output=OUT_TEXT,
    ),
    PromptSpec(
        stage=STAGE_HTML_SHORT,
        template=_SHORTEN_BASELINE + "\n\nDescription: $description",
        output=OUT_TEXT,
    ),
)


@dataclass(frozen=True)
class PromptCatalog:
    version: str
    specs: MappingProxyType

    def spec(self, stage: str) -> PromptSpec:
        try:
            return self.specs[stage]
        except KeyError:
            raise KeyError(f"unknown prompt stage: {stage!r}") from None

    def render(self, stage: str, **slots: str) -> str:
        return Template(self.spec(stage).template).substitute(**slots)

    def stages(self) -> tuple[str, ...]:
        return tuple(self.specs)


def default_catalog(version: str = CATALOG_VERSION) -> PromptCatalog:
    return PromptCatalog(
        version=version,
        specs=MappingProxyType({spec.stage: spec for spec in _SPECS}),
    )
