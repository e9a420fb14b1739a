#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures.

Deliberately avoids importing kgrag: files are written straight from the
documented formats and the golden prompt is assembled from the format
rules with a plain brute-force scan, so fixtures stay independent of the
engine code they test.
"""

import json
import struct
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

TRIPLETS = [
    # (subject, relation, object, source_id); 12 suggestive_of, 3 duplicate
    # canonical texts (one text x3, one x2)
    ("opacity", "suggestive_of", "pneumonia", "rpt0001"),
    ("opacities", "suggestive_of", "effusions", "rpt0002"),
    ("opacities", "suggestive_of", "effusions", "rpt0003"),
    ("opacities", "suggestive_of", "effusions", "rpt0004"),
    ("radiopacity", "suggestive_of", "edema", "rpt0005"),
    ("line", "suggestive_of", "hydropneumothorax", "rpt0006"),
    ("Tubes", "suggestive_of", "drain", "rpt0007"),
    ("opacification", "suggestive_of", "consolidation", "rpt0008"),
    ("opacification", "suggestive_of", "consolidation", "rpt0009"),
    ("atelectasis", "suggestive_of", "scarring", "rpt0010"),
    ("opacification", "suggestive_of", "collapse", "rpt0011"),
    ("haziness", "suggestive_of", "atelectasis", "rpt0012"),
    ("catheter", "located_at", "svc", "rpt0013"),
    ("opacity", "located_at", "left_lower_lobe", "rpt0014"),
    ("effusion", "located_at", "right_base", "rpt0015"),
    ("pneumothorax", "located_at", "apex", "rpt0016"),
    ("tube", "located_at", "stomach", "rpt0017"),
    ("consolidation", "located_at", "lingula", "rpt0018"),
    ("edema", "modify", "severe", "rpt0019"),
    ("atelectasis", "modify", "mild", "rpt0020"),
]

DIM = 16


def write_kgeb(path, ids, matrix):
    with open(path, "wb") as fh:
        fh.write(b"KGEB")
        fh.write(struct.pack("<HIQ", 1, matrix.shape[1] if len(ids) else 0, len(ids)))
        for i, vid in enumerate(ids):
            fh.write(struct.pack("<Q", vid))
            fh.write(matrix[i].astype("<f4").tobytes())


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    # triplet export
    with open(FIXTURES / "triplets_20.jsonl", "w", encoding="utf-8") as fh:
        for s, r, o, src in TRIPLETS:
            fh.write(json.dumps({"subject": s, "relation": r, "object": o,
                                 "source_id": src}) + "\n")

    # 3 good lines + 1 malformed (line 4)
    with open(FIXTURES / "triplets_malformed.jsonl", "w", encoding="utf-8") as fh:
        for s, r, o, src in TRIPLETS[:3]:
            fh.write(json.dumps({"subject": s, "relation": r, "object": o,
                                 "source_id": src}) + "\n")
        fh.write('{"subject": "opacity", "relation": 42}\n')

    # triplet embeddings, ids 0..19
    rng = np.random.default_rng(7)
    matrix = rng.standard_normal((len(TRIPLETS), DIM)).astype(np.float32)
    write_kgeb(FIXTURES / "embeddings_20.kgeb", list(range(len(TRIPLETS))), matrix)

    # one fixed query vector
    query = rng.standard_normal(DIM).astype(np.float32)
    write_kgeb(FIXTURES / "query.kgeb", [0], query[None, :])

    # brute-force top-7 for the golden prompt (independent scan)
    normed = matrix / np.linalg.norm(matrix.astype(np.float64), axis=1,
                                     keepdims=True)
    q = query.astype(np.float64)
    q = q / np.linalg.norm(q)
    scores = normed.astype(np.float32).astype(np.float64) @ q
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:7]
    texts = [f"{s} {r} {o}" for s, r, o, _ in TRIPLETS]
    context = "; ".join(texts[i] for i in order)
    question = ("Which signs show that the patient has positive Lung Opacity, "
                "positive Pleural Effusion?")
    golden = f"Context: {context}\nQuestion: {question}"
    (FIXTURES / "golden_prompt.txt").write_bytes(golden.encode("utf-8"))

    # pipeline cases for sweep/compare: 4 queries in a separate KGEB
    case_queries = rng.standard_normal((4, DIM)).astype(np.float32)
    write_kgeb(FIXTURES / "case_queries.kgeb", [100, 101, 102, 103], case_queries)
    cases = [
        {"case_id": "c0", "query_id": 100,
         "predicted": [{"label": "Pneumonia", "score": 0.9, "certainty": "positive"}],
         "gold": [{"label": "Pneumonia", "certainty": "positive"}],
         "reference_nles": ["New bibasilar patchy airspace opacities, concerning for aspiration pneumonia."]},
        {"case_id": "c1", "query_id": 101,
         "predicted": [{"label": "Atelectasis", "score": 0.8, "certainty": "positive"},
                        {"label": "Edema", "score": 0.5, "certainty": "uncertain"}],
         "gold": [{"label": "Atelectasis", "certainty": "positive"},
                   {"label": "Edema", "certainty": "uncertain"}],
         "reference_nles": ["A hazy opacity over the left lung base suggests a layering pleural effusion."]},
        {"case_id": "c2", "query_id": 102,
         "predicted": [{"label": "Pleural Effusion", "score": 0.7, "certainty": "positive"}],
         "gold": [{"label": "Pleural Effusion", "certainty": "negative"}],
         "reference_nles": ["A small area of hazy opacity at the right costophrenic angle."]},
        {"case_id": "c3", "query_id": 103,
         "predicted": [{"label": "Lung Opacity", "score": 0.95, "certainty": "positive"}],
         "gold": [{"label": "Lung Opacity", "certainty": "positive"}],
         "reference_nles": ["Multiple opacifications likely represent multifocal pneumonia.",
                             "Multifocal pneumonia is likely, possibly due to aspiration."]},
    ]
    with open(FIXTURES / "pipeline_cases.jsonl", "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case) + "\n")

    # uni-modal fixture: image embeddings equal to the 4 case queries, each
    # image mapped to a hand-picked triplet id list
    write_kgeb(FIXTURES / "image_embeddings.kgeb", [100, 101, 102, 103],
               case_queries)
    image_triplets = {"100": [0, 1, 2], "101": [4, 5, 6, 7],
                      "102": [9, 10], "103": [11, 12, 13]}
    (FIXTURES / "image_triplets.json").write_text(
        json.dumps(image_triplets, indent=2) + "\n", encoding="utf-8")

    # 10-pair NLG metric corpus
    corpus = [
        ("There is a new opacity in the right lower lobe.",
         ["New bibasilar patchy airspace opacities are seen.",
          "There is a new opacity in the right lower lobe."]),
        ("Bibasilar opacities are likely atelectasis.",
         ["Bibasilar opacities, likely atelectasis."]),
        ("A hazy opacity suggests a layering pleural effusion.",
         ["A hazy opacity over the left lung base suggests a layering pleural effusion."]),
        ("Multiple opacifications represent multifocal pneumonia.",
         ["Multiple opacifications likely represent multifocal pneumonia, possibly due to aspiration."]),
        ("Substantial bibasilar opacification explained by atelectasis.",
         ["Substantial bibasilar opacification can be explained by atelectasis."]),
        ("There is a left retrocardiac opacity and bilateral effusions.",
         ["There is a left retrocardiac opacity and likely bilateral pleural effusions."]),
        ("The cardiac silhouette is enlarged suggesting cardiomegaly.",
         ["The heart size is enlarged, consistent with cardiomegaly.",
          "Enlarged cardiac silhouette suggests cardiomegaly."]),
        ("No pneumothorax is identified on this radiograph.",
         ["There is no evidence of pneumothorax."]),
        ("Small right pleural effusion with adjacent atelectasis.",
         ["Small right pleural effusion is present with adjacent compressive atelectasis."]),
        ("Interstitial markings are consistent with pulmonary edema.",
         ["Diffuse interstitial markings consistent with pulmonary edema."]),
    ]
    with open(FIXTURES / "metric_corpus_10.jsonl", "w", encoding="utf-8") as fh:
        for i, (cand, refs) in enumerate(corpus):
            fh.write(json.dumps({"case_id": f"m{i}", "candidate": cand,
                                 "references": refs}) + "\n")

    # evaluate-command cases (pre-generated NLEs, no pipeline)
    eval_cases = []
    for i, (cand, refs) in enumerate(corpus):
        correct = i % 3 != 2  # 7 of 10 fully matching
        eval_cases.append({
            "case_id": f"e{i}",
            "predicted": [{"label": "Pneumonia", "score": 0.8 if correct else 0.2,
                            "certainty": "positive" if correct else "negative"}],
            "gold": [{"label": "Pneumonia", "certainty": "positive"}],
            "generated_nle": cand,
            "reference_nles": refs,
        })
    with open(FIXTURES / "eval_cases.jsonl", "w", encoding="utf-8") as fh:
        for case in eval_cases:
            fh.write(json.dumps(case) + "\n")

    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
