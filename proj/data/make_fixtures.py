#!/usr/bin/env python3
"""Regenerates the bundled fixtures in this directory.

Everything is drawn from a fixed seed, so rerunning reproduces the files
byte for byte. Expected extraction counts are tallied while the sentences
are built, from what each template contains.
"""

import csv
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
SEED = 20240611

# lemma, total occurrences, CC occurrences
SUBCAT_COUNTS = [
    ("know", 119678, 28664), ("think", 46610, 35080), ("mean", 30281, 1916),
    ("say", 24805, 13612), ("like", 23578, 3381), ("see", 20578, 7111),
    ("take", 15314, 994), ("feel", 11274, 2298), ("guess", 9744, 6101),
    ("hear", 9166, 2408), ("tell", 7264, 3345), ("find", 6579, 1948),
    ("love", 6290, 762), ("thank", 5521, 289), ("remember", 4626, 2191),
    ("read", 3649, 346), ("show", 3170, 650), ("understand", 2984, 1092),
    ("suppose", 2911, 326), ("hope", 2488, 1869), ("teach", 2380, 238),
    ("figure", 2327, 912), ("believe", 1970, 947), ("imagine", 1891, 874),
    ("check", 1754, 114), ("care", 1693, 263), ("decide", 1428, 579),
    ("realize", 1395, 974), ("agree", 1324, 172), ("hold", 1313, 107),
    ("wish", 1291, 1028), ("worry", 1028, 90), ("expect", 980, 349),
    ("consider", 840, 264), ("mind", 733, 208), ("notice", 721, 324),
    ("mention", 645, 190), ("answer", 561, 26), ("explain", 561, 106),
    ("bet", 480, 272), ("accept", 465, 49), ("complain", 423, 53),
    ("stress", 234, 23), ("admit", 209, 98), ("respond", 176, 11),
    ("joke", 156, 32), ("promise", 146, 58), ("judge", 119, 19),
    ("claim", 110, 47), ("suggest", 108, 50),
]

FACTIVE = {"know", "realize", "remember", "notice", "understand", "find", "see", "hear", "admit", "regret"}

# lemma -> (3sg present, past)
CC_VERBS = {
    "think": ("thinks", "thought"), "know": ("knows", "knew"), "say": ("says", "said"),
    "guess": ("guesses", "guessed"), "mean": ("means", "meant"), "feel": ("feels", "felt"),
    "hope": ("hopes", "hoped"), "believe": ("believes", "believed"), "realize": ("realizes", "realized"),
    "remember": ("remembers", "remembered"), "suppose": ("supposes", "supposed"), "wish": ("wishes", "wished"),
    "bet": ("bets", "bet"), "figure": ("figures", "figured"), "imagine": ("imagines", "imagined"),
    "understand": ("understands", "understood"), "notice": ("notices", "noticed"),
    "admit": ("admits", "admitted"), "claim": ("claims", "claimed"), "hear": ("hears", "heard"),
}
CC_VERB_WEIGHTS = {"think": 8, "know": 5, "say": 5, "guess": 4, "mean": 2, "feel": 2, "hope": 2}

OBJ_VERBS = [("know", "knows", "knew"), ("like", "likes", "liked"), ("see", "sees", "saw"),
             ("love", "loves", "loved"), ("take", "takes", "took"), ("read", "reads", "read"),
             ("check", "checks", "checked"), ("hold", "holds", "held")]

# Lower verbs of the complement: never matrix-verb lemmas.
LOW_VERBS = [("leave", "left"), ("stay", "stayed"), ("move", "moved"), ("win", "won"),
             ("call", "called"), ("work", "worked"), ("quit", "quit"), ("cook", "cooked")]
LOW_TRANSITIVE = {"win", "call", "cook"}

FREQUENCY = {
    "i": 4.52, "you": 4.49, "he": 4.02, "she": 3.86, "they": 3.95, "it": 4.38, "we": 3.91,
    "think": 3.30, "thinks": 2.41, "thought": 3.01, "know": 3.76, "knows": 2.70, "knew": 2.82,
    "say": 3.26, "says": 2.83, "said": 3.38, "guess": 2.74, "mean": 3.05, "feel": 2.91,
    "hope": 2.61, "believe": 2.62, "like": 3.64, "see": 3.28, "take": 3.00,
    "boss": 1.77, "friend": 2.52, "car": 2.45, "man": 2.89,
}  # remaining words fall back to corpus rates

FILLED = ["uh", "um", "er", "hmm"]


class Sentence:
    def __init__(self):
        self.tokens = []  # dicts: form lemma upos feats head deprel

    def add(self, form, lemma, upos, deprel, head=None, feats="_"):
        self.tokens.append({"form": form, "lemma": lemma, "upos": upos, "feats": feats,
                            "head": head, "deprel": deprel})
        return len(self.tokens)

    def set_head(self, i, head):
        self.tokens[i - 1]["head"] = head

    def conllu(self):
        lines = []
        for i, t in enumerate(self.tokens, 1):
            lines.append("\t".join([str(i), t["form"], t["lemma"], t["upos"], "_", t["feats"],
                                    str(t["head"]), t["deprel"], "_", "_"]))
        return lines


def add_subject(s, rng, choice, head_placeholder=0):
    """Appends a subject phrase; returns (head index, form class, identity)."""
    if choice == "I":
        i = s.add("I", "I", "PRON", "nsubj", head_placeholder, "Case=Nom|Number=Sing|Person=1|PronType=Prs")
        return i, "I", "i"
    if choice == "You":
        i = s.add("you", "you", "PRON", "nsubj", head_placeholder, "Person=2|PronType=Prs")
        return i, "You", "you"
    if choice == "OtherPronoun":
        form = rng.choice(["he", "she", "they"])
        i = s.add(form, form, "PRON", "nsubj", head_placeholder, "Case=Nom|PronType=Prs")
        return i, "OtherPronoun", form
    det = rng.choice(["the", "my"])
    noun = rng.choice(["boss", "friend"])
    d = s.add(det, det, "DET", "det", None)
    n = s.add(noun, noun, "NOUN", "nsubj", head_placeholder, "Number=Sing")
    s.set_head(d, n)
    return n, "OtherNoun", noun


def subject_choice(rng):
    r = rng.random()
    if r < 0.35:
        return "I"
    if r < 0.55:
        return "You"
    if r < 0.8:
        return "OtherPronoun"
    return "OtherNoun"


def matrix_form(rng, lemma, subj_class, forms):
    third = subj_class == "OtherNoun" or (subj_class == "OtherPronoun")
    if rng.random() < 0.3:
        return forms[1], "Mood=Ind|Tense=Past|VerbForm=Fin"
    if third:
        return forms[0], "Mood=Ind|Number=Sing|Person=3|Tense=Pres|VerbForm=Fin"
    return lemma, "Mood=Ind|Tense=Pres|VerbForm=Fin"


def add_clause(s, rng, head_of, with_subject=True, that=False, doubling=False):
    """Complement clause attached to `head_of` by ccomp; returns its record."""
    comps = []
    if that:
        comps.append(s.add("that", "that", "SCONJ", "mark", None))
        if doubling:
            comps.append(s.add("that", "that", "SCONJ", "mark", None))
    subj = None
    deps = list(comps)
    if with_subject:
        r = rng.random()
        if r < 0.55:
            form = rng.choice(["he", "she", "they", "it", "I", "you", "he", "she", "that"])
            subj = s.add(form, form, "PRON", "nsubj", None, "PronType=Dem" if form == "that" else "PronType=Prs")
            deps.append(subj)
        else:
            det = s.add(rng.choice(["the", "my"]), "the", "DET", "det", None)
            words = [det]
            if rng.random() < 0.4:
                words.append(s.add(rng.choice(["old", "new"]), "old", "ADJ", "amod", None))
                s.tokens[-1]["lemma"] = s.tokens[-1]["form"]
            subj = s.add(rng.choice(["car", "man", "friend", "boss"]), "man", "NOUN", "nsubj", None)
            for w in words:
                s.set_head(w, subj)
            s.tokens[subj - 1]["lemma"] = s.tokens[subj - 1]["form"]
            s.tokens[det - 1]["lemma"] = s.tokens[det - 1]["form"]
            deps.append(subj)
    lemma, past = rng.choice(LOW_VERBS)
    if not with_subject:
        v = s.add(lemma, lemma, "VERB", "ccomp", head_of, "VerbForm=Inf")
    else:
        v = s.add(past, lemma, "VERB", "ccomp", head_of, "Mood=Ind|Tense=Past|VerbForm=Fin")
    for d in deps:
        s.set_head(d, v)
    if lemma in LOW_TRANSITIVE and rng.random() < 0.7:
        d = s.add("the", "the", "DET", "det", None)
        o = s.add(rng.choice(["game", "dinner", "office"]), "game", "NOUN", "obj", v)
        s.tokens[o - 1]["lemma"] = s.tokens[o - 1]["form"]
        s.set_head(d, o)
    elif rng.random() < 0.3:
        s.add(rng.choice(["yesterday", "early", "again"]), "yesterday", "ADV", "advmod", v)
        s.tokens[-1]["lemma"] = s.tokens[-1]["form"]
    return {"subject": subj is not None, "that": that}


def weighted_cc_verb(rng):
    lemmas = sorted(CC_VERBS)
    weights = [CC_VERB_WEIGHTS.get(l, 1) for l in lemmas]
    return rng.choices(lemmas, weights)[0]


def cc_sentence(rng):
    """Matrix clause with one (rarely two) complement clauses."""
    s = Sentence()
    occ = []
    prefix_verb = None
    if rng.random() < 0.12:
        y = s.add("you", "you", "PRON", "nsubj", None, "Person=2|PronType=Prs")
        k = s.add("know", "know", "VERB", "parataxis", None, "Mood=Ind|Tense=Pres|VerbForm=Fin")
        s.add(",", ",", "PUNCT", "punct", k)
        s.set_head(y, k)
        prefix_verb = k
    choice = subject_choice(rng)
    repeat = choice in ("I", "You", "OtherPronoun") and rng.random() < 0.08
    first = None
    if repeat:
        first = len(s.tokens) + 1
        subj_i, klass, ident = add_subject(s, rng, choice)
        s.tokens[subj_i - 1]["deprel"] = "reparandum"
        form = s.tokens[subj_i - 1]["form"]
        subj_i = s.add(form, s.tokens[subj_i - 1]["lemma"], "PRON", "nsubj", None, s.tokens[subj_i - 1]["feats"])
        s.set_head(first, subj_i)
    else:
        subj_i, klass, ident = add_subject(s, rng, choice)
    pause = None
    if rng.random() < 0.1:
        pause = s.add(rng.choice(FILLED[:2]), "uh", "INTJ", "discourse", None)
        s.tokens[pause - 1]["lemma"] = s.tokens[pause - 1]["form"]
    lemma = weighted_cc_verb(rng)
    form, feats = matrix_form(rng, lemma, klass, CC_VERBS[lemma])
    v = s.add(form, lemma, "VERB", "root", 0, feats)
    s.set_head(subj_i, v)
    if pause:
        s.set_head(pause, v)
    if prefix_verb:
        s.set_head(prefix_verb, v)
    if rng.random() < 0.1:
        a = s.add(rng.choice(["honestly", "really", "probably"]), "honestly", "ADV", "advmod", v)
        s.tokens[a - 1]["lemma"] = s.tokens[a - 1]["form"]
    r = rng.random()
    missing_cc_subject = r < 0.04
    two_clauses = 0.04 <= r < 0.08
    that = rng.random() < 0.35
    doubling = that and rng.random() < 0.1
    ccs = [add_clause(s, rng, v, with_subject=not missing_cc_subject, that=that, doubling=doubling)]
    if two_clauses:
        s.add(",", ",", "PUNCT", "punct", v)
        ccs.append(add_clause(s, rng, v, that=rng.random() < 0.35))
    s.add(".", ".", "PUNCT", "punct", v)
    if prefix_verb:
        occ.append({"verbal": True, "final": False, "subject": True, "ccs": []})
    occ.append({"verbal": True, "final": False, "subject": True, "ccs": ccs})
    return s, occ


def object_sentence(rng):
    s = Sentence()
    choice = subject_choice(rng)
    subj_i, klass, _ = add_subject(s, rng, choice)
    lemma, third, past = rng.choice(OBJ_VERBS)
    form, feats = matrix_form(rng, lemma, klass, (third, past))
    v = s.add(form, lemma, "VERB", "root", 0, feats)
    s.set_head(subj_i, v)
    if rng.random() < 0.5:
        s.add(rng.choice(["it", "them"]), "it", "PRON", "obj", v, "PronType=Prs")
        s.tokens[-1]["lemma"] = s.tokens[-1]["form"]
    else:
        d = s.add("the", "the", "DET", "det", None)
        o = s.add(rng.choice(["book", "movie", "news", "car"]), "book", "NOUN", "obj", v)
        s.tokens[o - 1]["lemma"] = s.tokens[o - 1]["form"]
        s.set_head(d, o)
    s.add(".", ".", "PUNCT", "punct", v)
    return s, [{"verbal": True, "final": False, "subject": True, "ccs": []}]


def final_sentence(rng):
    s = Sentence()
    subj_i, klass, _ = add_subject(s, rng, rng.choice(["I", "You"]))
    lemma = rng.choice(["know", "guess", "see", "think"])
    v = s.add(lemma, lemma, "VERB", "root", 0, "Mood=Ind|Tense=Pres|VerbForm=Fin")
    s.set_head(subj_i, v)
    s.add(".", ".", "PUNCT", "punct", v)
    return s, [{"verbal": True, "final": True, "subject": True, "ccs": []}]


def no_subject_sentence(rng):
    s = Sentence()
    v = s.add("thank", "thank", "VERB", "root", 0, "Mood=Ind|Tense=Pres|VerbForm=Fin")
    s.add("you", "you", "PRON", "obj", v, "Person=2|PronType=Prs")
    s.add(rng.choice(["so", "very"]), "so", "ADV", "advmod", None)
    s.add("much", "much", "ADV", "advmod", v)
    s.set_head(3, 4)
    s.tokens[2]["lemma"] = s.tokens[2]["form"]
    s.add(".", ".", "PUNCT", "punct", v)
    return s, [{"verbal": True, "final": False, "subject": False, "ccs": []}]


def homograph_sentence(rng):
    s = Sentence()
    t = s.add("that", "that", "PRON", "nsubj", None, "PronType=Dem")
    c = s.add("was", "be", "AUX", "cop", None, "Mood=Ind|Tense=Past|VerbForm=Fin")
    d = s.add("a", "a", "DET", "det", None)
    a = s.add("good", "good", "ADJ", "amod", None)
    n = s.add("read", "read", "NOUN", "root", 0, "Number=Sing")
    for i in (t, c, d, a):
        s.set_head(i, n)
    s.add(".", ".", "PUNCT", "punct", n)
    return s, [{"verbal": False}]


def filler_sentence(rng):
    s = Sentence()
    kind = rng.randrange(3)
    if kind == 0:
        y = s.add(rng.choice(["yeah", "okay", "right"]), "yeah", "INTJ", "root", 0)
        s.tokens[y - 1]["lemma"] = s.tokens[y - 1]["form"]
        s.add(".", ".", "PUNCT", "punct", y)
    elif kind == 1:
        w = s.add("we", "we", "PRON", "nsubj", None, "PronType=Prs")
        v = s.add("went", "go", "VERB", "root", 0, "Mood=Ind|Tense=Past|VerbForm=Fin")
        s.add("home", "home", "ADV", "advmod", v)
        s.add(".", ".", "PUNCT", "punct", v)
        s.set_head(w, v)
    else:
        i = s.add("it", "it", "PRON", "nsubj", None, "PronType=Prs")
        c = s.add("was", "be", "AUX", "cop", None, "Mood=Ind|Tense=Past|VerbForm=Fin")
        f = s.add(rng.choice(["fun", "great", "weird"]), "fun", "ADJ", "root", 0)
        s.tokens[f - 1]["lemma"] = s.tokens[f - 1]["form"]
        s.set_head(i, f)
        s.set_head(c, f)
        s.add(".", ".", "PUNCT", "punct", f)
    return s, []


KINDS = [(cc_sentence, 0.56), (object_sentence, 0.15), (final_sentence, 0.05),
         (no_subject_sentence, 0.03), (homograph_sentence, 0.03), (filler_sentence, 0.18)]


def make_corpus(rng, conversations=8, per_conversation=25):
    out_dir = HERE / "corpus"
    out_dir.mkdir(exist_ok=True)
    for old in out_dir.glob("*.conllu"):
        old.unlink()
    counts = {"conversations": conversations, "utterances": 0, "tokens": 0,
              "training": {"candidates": 0, "non_verbal_homograph": 0, "sentence_final": 0,
                           "missing_matrix_subject": 0, "retained": 0, "positive": 0},
              "that_dataset": {"candidates": 0, "first_cc_in_conversation": 0, "missing_subject": 0,
                               "additional_cc_of_verb": 0, "retained": 0, "that_present": 0},
              "speakers": 0}
    training_ids = []
    fns = [k[0] for k in KINDS]
    weights = [k[1] for k in KINDS]
    for c in range(conversations):
        conv = f"conv{c + 1:02d}"
        speakers = [f"{conv}_A", f"{conv}_B"]
        counts["speakers"] += 2
        lines = []
        cc_seq = []  # (matrix subject present, cc record) in temporal order
        for u in range(per_conversation):
            s, occ = rng.choices(fns, weights)[0](rng)
            lines.append(f"# conversation_id = {conv}")
            lines.append(f"# speaker = {speakers[u % 2]}")
            lines.append(f"# utterance_index = {u}")
            lines.append("# text = " + " ".join(t["form"] for t in s.tokens))
            lines.extend(s.conllu())
            lines.append("")
            counts["utterances"] += 1
            counts["tokens"] += len(s.tokens)
            verb_positions = [i for i, t in enumerate(s.tokens, 1)
                              if t["lemma"] in {l for l, _, _ in SUBCAT_COUNTS}
                              and t["upos"] in ("VERB", "AUX", "NOUN")]
            for o, vi in zip(occ, verb_positions):
                tr = counts["training"]
                tr["candidates"] += 1
                if not o["verbal"]:
                    tr["non_verbal_homograph"] += 1
                    continue
                if o["final"]:
                    tr["sentence_final"] += 1
                    continue
                if not o["subject"]:
                    tr["missing_matrix_subject"] += 1
                    continue
                tr["retained"] += 1
                tr["positive"] += 1 if o["ccs"] else 0
                training_ids.append((f"{conv}:{u}:{vi}", o, s, vi))
                for k, cc in enumerate(o["ccs"]):
                    cc_seq.append({"verb": (u, vi), "matrix_subject": o["subject"], "cc": cc, "rank": k})
        td = counts["that_dataset"]
        td["candidates"] += len(cc_seq)
        seen = set()
        for i, rec in enumerate(cc_seq):
            if i == 0:
                td["first_cc_in_conversation"] += 1
                continue
            if not rec["matrix_subject"] or not rec["cc"]["subject"]:
                td["missing_subject"] += 1
                continue
            if rec["verb"] in seen:
                td["additional_cc_of_verb"] += 1
                continue
            seen.add(rec["verb"])
            td["retained"] += 1
            td["that_present"] += 1 if rec["cc"]["that"] else 0
        (out_dir / f"{conv}.conllu").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return counts, training_ids


def write_lexicons():
    lex = HERE / "lexicon"
    lex.mkdir(exist_ok=True)
    (lex / "verbs.txt").write_text("".join(l + "\n" for l, _, _ in SUBCAT_COUNTS))
    (lex / "frequency.tsv").write_text("".join(f"{w}\t{v:.2f}\n" for w, v in sorted(FREQUENCY.items())))
    (lex / "factivity.tsv").write_text("".join(f"{l}\t{1 if l in FACTIVE else 0}\n" for l, _, _ in SUBCAT_COUNTS))
    (lex / "filled_pauses.txt").write_text("".join(f + "\n" for f in FILLED))
    with open(HERE / "subcat_counts.tsv", "w", newline="") as f:
        f.write("lemma\ttotal\tcc\n")
        for lemma, total, cc in SUBCAT_COUNTS:
            f.write(f"{lemma}\t{total:,}\t{cc:,}\n")


def write_embeddings(rng, training_ids, dims=768):
    """Random projection of a small pre-verb context description."""
    lemmas = [l for l, _, _ in SUBCAT_COUNTS]
    feat_dim = len(lemmas) + 4 + 2
    proj = [[rng.gauss(0.0, 1.0 / math.sqrt(feat_dim)) for _ in range(feat_dim)] for _ in range(dims)]
    with open(HERE / "embeddings.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id"] + [f"e{j}" for j in range(dims)])
        for ident, occ, s, vi in training_ids:
            x = [0.0] * feat_dim
            x[lemmas.index(s.tokens[vi - 1]["lemma"])] = 1.0
            subj = next(i for i, t in enumerate(s.tokens, 1) if t["head"] == vi and t["deprel"] == "nsubj")
            form = s.tokens[subj - 1]["form"].lower()
            klass = 0 if form == "i" else 1 if form == "you" else 2 if s.tokens[subj - 1]["upos"] == "PRON" else 3
            x[len(lemmas) + klass] = 1.0
            x[-2] = vi / 10.0
            x[-1] = 1.0 if s.tokens[vi - 1]["form"] != s.tokens[vi - 1]["lemma"] else 0.0
            row = [sum(p * v for p, v in zip(proj[j], x)) + rng.gauss(0.0, 0.01) for j in range(dims)]
            w.writerow([ident] + [f"{v:.6f}" for v in row])


def write_separable(rng, n=2000, d=10, margin=0.5):
    w_true = [rng.gauss(0.0, 1.0) for _ in range(d)]
    norm = math.sqrt(sum(v * v for v in w_true))
    w_true = [v / norm for v in w_true]
    rows = []
    while len(rows) < n:
        x = [rng.gauss(0.0, 1.0) for _ in range(d)]
        s = sum(a * b for a, b in zip(w_true, x))
        if abs(s) < margin:
            continue
        rows.append(x + [1 if s > 0 else 0])
    with open(HERE / "separable.csv", "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow([f"x{j}" for j in range(d)] + ["label"])
        for r in rows:
            wr.writerow([f"{v:.6f}" for v in r[:-1]] + [r[-1]])


def main():
    rng = random.Random(SEED)
    write_lexicons()
    counts, training_ids = make_corpus(rng)
    (HERE / "expected_counts.json").write_text(json.dumps(counts, indent=2) + "\n")
    write_embeddings(random.Random(SEED + 1), training_ids)
    write_separable(random.Random(SEED + 2))
    config = {
        "corpus": "corpus",
        "lexicons": {"verbs": "lexicon/verbs.txt", "frequency": "lexicon/frequency.tsv",
                     "factivity": "lexicon/factivity.tsv", "filled_pauses": "lexicon/filled_pauses.txt"},
        "subcat_counts": "subcat_counts.tsv",
        "embeddings": "embeddings.csv",
        "output_dir": "../out",
        "seed": 7,
        "density_source": "verb",
        "pca_components": 50,
        "bins": 10,
        "train": {"batch_size": 32, "max_epochs": 40, "patience": 5},
    }
    (HERE / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
