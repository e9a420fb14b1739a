"""From-scratch corpus NLG metrics over one shared tokenizer: BLEU-4,
ROUGE-L, CIDEr-D and METEOR-lite.

All scorers are pure and deterministic. METEOR-lite aligns unigrams by
exact match then Porter-stem match; it has no synonym stage, hence the
distinct name. Declared constants:

  BLEU smoothing   add-one on the n >= 2 precision fractions
  ROUGE-L beta     1.2
  CIDEr-D          sigma = 6 length penalty, candidate counts clipped to
                   reference counts, idf(g) = ln((1 + N) / (1 + df(g)))
                   (smoothed so a single-document corpus has all-zero IDF),
                   standard x10 scaling then x10 again for a 0-100 column
  METEOR-lite      F_mean = 10PR / (R + 9P), penalty 0.5 * (chunks/m)^3
"""

from __future__ import annotations

import math
import string
import warnings
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyCorpus

BLEU_MAX_N = 4
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0
CIDER_SCALE = 10.0  # applied on top of the standard x10, mapping to ~0-100


class DegenerateCorpusWarning(UserWarning):
    """CIDEr IDF is degenerate: fewer than two reference documents."""


@dataclass(frozen=True)
class EvalPair:
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]
    case_id: str = ""

    def __post_init__(self):
        if not self.references:
            raise ValueError("references must be nonempty")


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase, whitespace-split, strip edge punctuation, drop
    punctuation-only tokens."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tuple(tokens)


def make_pair(candidate: str, references: list[str], case_id: str = "") -> EvalPair:
    return EvalPair(tokenize(candidate),
                    tuple(tokenize(r) for r in references), case_id)


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


# --- BLEU-4 ---------------------------------------------------------------

def bleu4(corpus: list[EvalPair]) -> float:
    """Corpus-level BLEU-4 in [0, 100]: clipped modified precision for
    n=1..4, uniform weights, geometric mean, brevity penalty with the
    closest reference length."""
    if not corpus:
        raise EmptyCorpus("BLEU needs a nonempty corpus")
    matched = [0] * BLEU_MAX_N
    total = [0] * BLEU_MAX_N
    cand_len = 0
    ref_len = 0
    for pair in corpus:
        c = len(pair.candidate)
        cand_len += c
        # closest reference length; ties go to the shorter reference
        ref_len += min((abs(len(r) - c), len(r)) for r in pair.references)[1]
        for n in range(1, BLEU_MAX_N + 1):
            cand_counts = _ngrams(pair.candidate, n)
            max_ref: Counter = Counter()
            for ref in pair.references:
                for gram, count in _ngrams(ref, n).items():
                    max_ref[gram] = max(max_ref[gram], count)
            matched[n - 1] += sum(min(count, max_ref[gram])
                                  for gram, count in cand_counts.items())
            total[n - 1] += sum(cand_counts.values())
    if total[0] == 0 or matched[0] == 0:
        return 0.0
    log_sum = math.log(matched[0] / total[0])
    for n in range(2, BLEU_MAX_N + 1):
        log_sum += math.log((matched[n - 1] + 1) / (total[n - 1] + 1))
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_sum / BLEU_MAX_N)


# --- ROUGE-L --------------------------------------------------------------

def _lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pair: EvalPair) -> float:
    """LCS F-measure with beta=1.2; max over references; empty candidate -> 0."""
    if not pair.candidate:
        return 0.0
    best = 0.0
    beta2 = ROUGE_BETA ** 2
    for ref in pair.references:
        if not ref:
            continue
        lcs = _lcs_length(pair.candidate, ref)
        if lcs == 0:
            continue
        precision = lcs / len(pair.candidate)
        recall = lcs / len(ref)
        f = ((1 + beta2) * precision * recall) / (recall + beta2 * precision)
        best = max(best, f)
    return best


def rouge_l_corpus(corpus: list[EvalPair]) -> float:
    if not corpus:
        raise EmptyCorpus("ROUGE-L needs a nonempty corpus")
    return sum(rouge_l(p) for p in corpus) / len(corpus)


# --- CIDEr-D --------------------------------------------------------------

def _cider_idf(corpus: list[EvalPair]) -> list[dict]:
    """Per-n document frequencies over reference documents (one document
    per pair), smoothed: idf = ln((1 + N) / (1 + df))."""
    n_docs = len(corpus)
    idf_by_n = []
    for n in range(1, BLEU_MAX_N + 1):
        df: Counter = Counter()
        for pair in corpus:
            grams: set = set()
            for ref in pair.references:
                grams.update(_ngrams(ref, n).keys())
            df.update(grams)
        idf_by_n.append({g: math.log((1 + n_docs) / (1 + d)) for g, d in df.items()})
    return idf_by_n


def _tfidf(counts: Counter, idf: dict, default_idf: float) -> dict:
    return {g: c * idf.get(g, default_idf) for g, c in counts.items()}


def cider_d(corpus: list[EvalPair]) -> float:
    """Corpus CIDEr-D on the 0-100-style scale (standard value x 10)."""
    if not corpus:
        raise EmptyCorpus("CIDEr needs a nonempty corpus")
    n_docs = len(corpus)
    if n_docs < 2:
        warnings.warn(f"CIDEr IDF degenerate: {n_docs} reference document(s)",
                      DegenerateCorpusWarning, stacklevel=2)
    idf_by_n = _cider_idf(corpus)
    default_idf = math.log(1 + n_docs)  # unseen n-gram: df = 0
    pair_scores = []
    for pair in corpus:
        per_n = []
        for n in range(1, BLEU_MAX_N + 1):
            idf = idf_by_n[n - 1]
            cand_vec = _tfidf(_ngrams(pair.candidate, n), idf, default_idf)
            cand_norm = math.sqrt(sum(v * v for v in cand_vec.values()))
            sim_sum = 0.0
            for ref in pair.references:
                ref_vec = _tfidf(_ngrams(ref, n), idf, default_idf)
                ref_norm = math.sqrt(sum(v * v for v in ref_vec.values()))
                if cand_norm == 0.0 or ref_norm == 0.0:
                    continue
                dot = sum(min(v, ref_vec[g]) * ref_vec[g]
                          for g, v in cand_vec.items() if g in ref_vec)
                delta = len(pair.candidate) - len(ref)
                penalty = math.exp(-(delta * delta) / (2 * CIDER_SIGMA ** 2))
                sim_sum += penalty * dot / (cand_norm * ref_norm)
            per_n.append(10.0 * sim_sum / len(pair.references))
        pair_scores.append(sum(per_n) / BLEU_MAX_N)
    return CIDER_SCALE * sum(pair_scores) / len(pair_scores)


# --- METEOR-lite ----------------------------------------------------------

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Porter's m: number of VC sequences in the stem."""
    forms = "".join("c" if _is_consonant(stem, i) else "v" for i in range(len(stem)))
    m = 0
    i = 0
    while i < len(forms):
        if forms[i] == "v":
            while i < len(forms) and forms[i] == "v":
                i += 1
            if i < len(forms):
                m += 1
        i += 1
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if not (_is_consonant(word, len(word) - 3)
            and not _is_consonant(word, len(word) - 2)
            and _is_consonant(word, len(word) - 1)):
        return False
    return word[-1] not in "wxy"


def porter_stem(word: str) -> str:
    """Porter stemming algorithm (steps 1a-5b), for METEOR-lite's stem stage."""
    if len(word) <= 2:
        return word
    w = word

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b
    flag_1b = False
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    elif w.endswith("ed") and _contains_vowel(w[:-2]):
        w = w[:-2]
        flag_1b = True
    elif w.endswith("ing") and _contains_vowel(w[:-3]):
        w = w[:-3]
        flag_1b = True
    if flag_1b:
        if w.endswith(("at", "bl", "iz")):
            w += "e"
        elif (len(w) >= 2 and w[-1] == w[-2] and _is_consonant(w, len(w) - 1)
              and w[-1] not in "lsz"):
            w = w[:-1]
        elif _measure(w) == 1 and _ends_cvc(w):
            w += "e"

    # step 1c
    if w.endswith("y") and _contains_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    step2 = (("ational", "ate"), ("tional", "tion"), ("enci", "ence"),
             ("anci", "ance"), ("izer", "ize"), ("abli", "able"),
             ("alli", "al"), ("entli", "ent"), ("eli", "e"), ("ousli", "ous"),
             ("ization", "ize"), ("ation", "ate"), ("ator", "ate"),
             ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
             ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"),
             ("biliti", "ble"))
    for suffix, repl in step2:
        if w.endswith(suffix):
            if _measure(w[:-len(suffix)]) > 0:
                w = w[:-len(suffix)] + repl
            break

    # step 3
    step3 = (("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
             ("ical", "ic"), ("ful", ""), ("ness", ""))
    for suffix, repl in step3:
        if w.endswith(suffix):
            if _measure(w[:-len(suffix)]) > 0:
                w = w[:-len(suffix)] + repl
            break

    # step 4
    step4 = ("al", "ance", "ence", "er", "ic", "able", "ible", "ant",
             "ement", "ment", "ent", "ou", "ism", "ate", "iti", "ous",
             "ive", "ize")
    for suffix in sorted(step4, key=len, reverse=True):
        if w.endswith(suffix):
            stem = w[:-len(suffix)]
            if _measure(stem) > 1:
                w = stem
            break
    if w.endswith("ion") and len(w) > 3 and w[-4] in "st" and _measure(w[:-3]) > 1:
        w = w[:-3]

    # step 5a
    if w.endswith("e"):
        m = _measure(w[:-1])
        if m > 1 or (m == 1 and not _ends_cvc(w[:-1])):
            w = w[:-1]
    # step 5b
    if len(w) >= 2 and w[-1] == "l" and w[-2] == "l" and _measure(w) > 1:
        w = w[:-1]
    return w


def _align(candidate: tuple[str, ...], reference: tuple[str, ...]) -> list[tuple[int, int]]:
    """Greedy two-stage unigram alignment: exact match first, then stem
    match, each candidate token to the leftmost unmatched reference token."""
    cand_free = list(range(len(candidate)))
    ref_free = list(range(len(reference)))
    alignment = []
    for exact in (True, False):
        cand_keys = {i: candidate[i] if exact else porter_stem(candidate[i])
                     for i in cand_free}
        ref_keys = {j: reference[j] if exact else porter_stem(reference[j])
                    for j in ref_free}
        for i in list(cand_free):
            for j in ref_free:
                if cand_keys[i] == ref_keys[j]:
                    alignment.append((i, j))
                    cand_free.remove(i)
                    ref_free.remove(j)
                    break
    return sorted(alignment)


def _count_chunks(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in alignment:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor_lite(pair: EvalPair) -> float:
    """Exact+stem unigram METEOR: F_mean = 10PR/(R+9P) discounted by the
    fragmentation penalty 0.5*(chunks/matches)^3; max over references."""
    if not pair.candidate:
        return 0.0
    best = 0.0
    for ref in pair.references:
        if not ref:
            continue
        alignment = _align(pair.candidate, ref)
        m = len(alignment)
        if m == 0:
            continue
        precision = m / len(pair.candidate)
        recall = m / len(ref)
        f_mean = 10 * precision * recall / (recall + 9 * precision)
        penalty = 0.5 * (_count_chunks(alignment) / m) ** 3
        best = max(best, f_mean * (1.0 - penalty))
    return best


def meteor_corpus(corpus: list[EvalPair]) -> float:
    if not corpus:
        raise EmptyCorpus("METEOR needs a nonempty corpus")
    return sum(meteor_lite(p) for p in corpus) / len(corpus)
