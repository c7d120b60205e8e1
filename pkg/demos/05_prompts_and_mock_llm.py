"""
ICL prompt construction and a scripted chat backend
===================================================

The same NeighborSet that feeds the classifiers is rendered into the LLM
prompt, so every predictor argues from identical evidence.
"""

from iclkit import (
    LlmClient,
    Neighbor,
    NeighborSet,
    ScriptedChatBackend,
    build_icl_prompt,
    build_zero_shot_prompt,
    llm_predict,
    parse_label,
)
from iclkit.corpus import Example, LabelSpace
from iclkit.llm import majority_echo_script

labels = LabelSpace(("World", "Sports", "Business", "Sci/Tech"))
query = Example(id="q0", text="the index fell two percent", label="Business")
neighbors = (
    Neighbor("e0", 0.81, "Business", "markets slid on rate fears"),
    Neighbor("e1", 0.77, "Business", "shares dropped at the open"),
    Neighbor("e2", 0.41, "World", "talks resumed at the border"),
)
ns = NeighborSet(query_id="q0", k=3, neighbors=neighbors)

prompt = build_icl_prompt(ns, query, labels, mode="plain")
for msg in prompt.messages:
    print(f"[{msg.role}] {msg.content}")

weighted = build_icl_prompt(ns, query, labels, mode="weighted")
print("\nweighted mode appends scores:", weighted.messages[0].content.splitlines()[-1])

zero = build_zero_shot_prompt(query, labels)
print("zero-shot message count:", len(zero.messages))

# the scripted backend answers deterministically from the prompt content
client = LlmClient(ScriptedChatBackend(majority_echo_script), model="mock")
pred = llm_predict(client, prompt)
print("\nmock prediction:", pred.label, " model tag:", pred.model)

# replies are normalized before matching: case, punctuation, unique substrings
print(parse_label(" business. ", labels))
print(parse_label("Sci/Tech", labels))
