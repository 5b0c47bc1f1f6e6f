"""Writes a synthetic stand-in for the SNAX splits with the published class counts.

The real corpus consists of licensed tweets; this fixture only reproduces its
shape (class counts, span conventions) so the distribution and composition
code can be checked end to end. Output is deterministic.
"""
import random
from pathlib import Path

HERE = Path(__file__).parent
HEADER = "id\ttext\tclass\tspans\n"

DRUGS = ["quetiapine", "metformin", "humira", "citalopram", "metoprolol",
         "saxagliptin", "tamiflu", "adderall", "prozac", "lyrica"]
ADES = ["headaches", "nausea", "dizziness", "insomnia", "weight gain",
        "hair loss", "dry mouth", "restless legs", "heart failure", "rash"]
TAILS = ["today", "all week", "again", "since monday", "#sideeffects", "ugh"]

A_TEMPLATES = ["{drug} gave me {ade} {tail}", "started {drug} and now {ade} {tail}",
               "{ade} from {drug} {tail}"]
X_TEMPLATES = ["picked up my {drug} refill {tail}", "{drug} commercial on tv {tail}",
               "anyone else on {drug}? {tail}"]
N_TEMPLATES = ["{drug} did not give me any {ade} {tail}", "no {ade} on {drug} {tail}"]
S_TEMPLATES = ["could {drug} be causing my {ade}? {tail}", "{drug} might cause {ade} {tail}"]


def row(rng, ident, cls, templates):
    drug, ade, tail = rng.choice(DRUGS), rng.choice(ADES), rng.choice(TAILS)
    template = rng.choice(templates)
    text = template.format(drug=drug, ade=ade, tail=tail)
    spans = ""
    if cls == "A":
        start = len(template.split("{ade}")[0].format(drug=drug))
        spans = f"{start}:{start + len(ade)}"
        assert text[start:start + len(ade)] == ade
    return f"{ident}\t{text}\t{cls}\t{spans}\n"


def write(name, parts, rng):
    lines = [HEADER]
    for prefix, cls, count, templates in parts:
        lines += [row(rng, f"{prefix}-{cls.lower()}{i:04d}", cls, templates) for i in range(count)]
    (HERE / name).write_text("".join(lines), encoding="utf-8")


rng = random.Random(2022)
write("train_base.tsv", [("train", "A", 846, A_TEMPLATES), ("train", "X", 778, X_TEMPLATES)], rng)
write("train_n_pool.tsv", [("train", "N", 251, N_TEMPLATES)], rng)
write("train_s_pool.tsv", [("train", "S", 227, S_TEMPLATES)], rng)
write("test.tsv", [("test", "S", 73, S_TEMPLATES), ("test", "N", 73, N_TEMPLATES),
                   ("test", "A", 200, A_TEMPLATES), ("test", "X", 194, X_TEMPLATES)], rng)
