"""Fine-grained analysis: where do distractors gain their similarity?

Three tools on top of a finished evaluation:

* single-token swaps: find distractors that differ from the target in
  exactly one token, tag that token with a part of speech, and measure how
  much similarity the swap costs, normalized so different backends become
  comparable;
* the normalization factor itself: mean cosine of true parallel pairs minus
  mean cosine of deliberately mismatched ones;
* success bins: how lexically close to the target the "winning" distractors
  were, bucketed by character edit similarity.

    python3 demos/01_build_dataset.py
    python3 demos/04_shift_and_bins.py
"""

import sys
from pathlib import Path

from clsd.analysis import (
    mono_cross_correlation,
    normalization_factor,
    shift_analysis,
    shift_table_to_csv,
    success_distribution,
    success_distribution_to_csv,
)
from clsd.evaluator import evaluate
from clsd.providers import LexicalEmbedder
from clsd.records import DiffAnnotation, load_clsd_dataset, load_parallel_corpus
from clsd.textmetrics import jaccard_similarity, single_token_diff, tokenize

OUT = Path("demo_output")
if not (OUT / "dataset.jsonl").exists():
    sys.exit("demo_output/dataset.jsonl missing; run demos/01_build_dataset.py first")

corpus = load_parallel_corpus(OUT / "corpus.jsonl")
instances = load_clsd_dataset(OUT / "dataset.jsonl")

# Word-level view of one instance: tokens are whitespace-split with leading
# and trailing punctuation stripped; the set scheme lowercases for overlap.
first = instances[0]
print("target tokens:", tokenize(first.target.text).tokens)
print(
    "jaccard(target, distractor 1) =",
    round(
        jaccard_similarity(
            tokenize(first.target.text), tokenize(first.distractors[0].text)
        ),
        3,
    ),
)

# Single-token swaps, tagged by hand. In a real study the empty-pos rows
# come from the diff-annotate CLI step and a linguist (or tagger) fills
# them in; six sentences we can tag ourselves.
POS_BY_TOKEN = {
    "neuf": "NUM", "bus": "NOUN", "Dijon": "PROPN", "arrive": "VERB",
    "ouverte": "ADJ", "mardi": "NOUN", "piscine": "NOUN",
    "rue": "NOUN", "vend": "VERB", "fils": "NOUN",
    "augmente": "VERB", "l'essence": "NOUN", "juillet": "NOUN",
    "Avant": "ADP", "ville": "NOUN",
    "perdu": "VERB", "première": "ADJ",
}

annotations = []
for inst in instances:
    for index, distractor in enumerate(inst.distractors):
        diff = single_token_diff(inst.target, distractor)
        if diff is None:
            continue
        annotations.append(
            DiffAnnotation(
                instance_id=inst.id,
                distractor_index=index,
                position=diff.position,
                target_token=diff.target_token,
                distractor_token=diff.distractor_token,
                pos=POS_BY_TOKEN.get(diff.distractor_token, "X"),
            )
        )
print(f"\n{len(annotations)} single-token swaps found")

# The normalization factor scales raw cosine differences into "gap units":
# 1.0 means the whole distance between a true pair and an unrelated pair.
embedder = LexicalEmbedder(1024)
norm = normalization_factor(embedder, corpus, seed=42)
print(
    f"normalization for {norm.model_id} {norm.direction[0]}->{norm.direction[1]}: "
    f"{norm.value:.4f} ({norm.n_parallel} parallel / {norm.n_unrelated} shuffled pairs)"
)

table = shift_analysis(embedder, instances, annotations, norm)
print("\nshift by part of speech (negative cross = swap moved the distractor")
print("away from the source; mono is always <= 0 by construction):\n")
print(shift_table_to_csv(table))
print(f"mono/cross correlation, all swaps: {mono_cross_correlation(table):.3f}")

# Which distractors actually fooled the backend, and how close were they?
report = evaluate(embedder, instances, dataset_id="demo")
dist = success_distribution(report, instances)
print(f"\n{dist.n_successful} successful distractors, by edit similarity to the target:\n")
print(success_distribution_to_csv(dist))
