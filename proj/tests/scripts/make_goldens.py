#!/usr/bin/env python3
"""Writes golden rendered prompts for every template x {zero, 10-shot} x {trailing, leading}.

Independent of the C++ sources: the patterns are typed out here and the shot
permutation is recomputed with a Python mt19937_64 and the same Fisher-Yates
with rejection sampling the library documents.
"""
import json
import pathlib
import sys

MASK = (1 << 64) - 1


class MT19937_64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & MASK
        for i in range(1, 312):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & MASK
        self.idx = 312

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.idx = 0

    def next(self):
        if self.idx >= 312:
            self._twist()
        x = self.mt[self.idx]
        self.idx += 1
        x ^= (x >> 29) & 0x5555555555555555
        x ^= (x << 17) & 0x71D67FFFEDA60000
        x ^= (x << 37) & 0xFFF7EEE000000000
        x ^= x >> 43
        return x & MASK

    def below(self, bound):
        limit = MASK - (MASK % bound)
        while True:
            x = self.next()
            if x < limit:
                return x % bound

    def shuffle(self, items):
        for i in range(len(items), 1, -1):
            j = self.below(i)
            items[i - 1], items[j] = items[j], items[i - 1]


def _self_check():
    g = MT19937_64(5489)
    for _ in range(9999):
        g.next()
    assert g.next() == 9981545732273789042, "mt19937_64 reference value"


YN = ("yes", "no")
TF = ("true", "false")


def pd(question):
    return ("{A}. {B}. Question: " + question + " Answer:",
            "Question: " + question + " {A}. {B}. Answer:", YN)


TEMPLATES = {
    "CM-1": ("{A} Matches to {B}. Correct? Answer:", "Correct? {A} Matches to {B}. Answer:", YN),
    "CM-2": ("{A} Means that {B}. Correct? Answer:", "Correct? {A} Means that {B}. Answer:", YN),
    "PD-1": pd("Do Statement 1 and Statement 2 express the same meaning? Yes or no?"),
    "PD-2": pd("Do Statement 1 and Statement 2 express the same meaning?"),
    "PD-3": pd("Do Statement 1 and Statement 2 have similar meanings? Yes or no?"),
    "PD-4": pd("Are Statement 1 and Statement 2 saying the same thing? Yes or no?"),
    "PD-5": pd("Are Statement 1 and Statement 2 essentially the same? Yes or no?"),
    "PD-6": pd("Do Statement 1 and Statement 2 both refer to the same event? Yes or no?"),
    "NLI-1": ("Suppose it's true that {A}. Then, is {B}. Question: Is true or false? Answer:",
              "Question: Is true or false? Suppose it's true that {A}. Then, is {B}. Answer:", TF),
    "NLI-2": ("Take the following as truth: {A}. Then {B} is true or false? Answer:",
              "Question: Is Statement 2 true or false? Take the following as truth: {A}. Then {B}. Answer:", TF),
    "NLI-3": ("{A}. Based on the previous statement, is it true that {B}? Yes or no? Answer:",
              "Question: Based on Statement 1, is it true that Statement 2? Yes or no? {A}. {B}. Answer:", YN),
    "NLI-4": ("Given {A} Is it guaranteed true that {B}? Yes or no? Answer:",
              "Question: Given Statement 1, is it guaranteed true that Statement 2? Yes or no? {A}. {B}. Answer:", YN),
    "NLI-5": ("Suppose {A}. Can we infer that {B}? Yes or no? Answer:",
              "Question: Suppose Statement 1. Can we infer that Statement 2? Yes or no? {A}. {B}. Answer:", YN),
}

SHOT_SEED = 2024


def render(pattern, pair):
    a = "Statement 1: " + pair["input_claim"]
    b = "Statement 2: " + pair["verified_claim"]
    i, j = pattern.index("{A}"), pattern.index("{B}")
    assert i < j
    return pattern[:i] + a + pattern[i + 3:j] + b + pattern[j + 3:]


def main(fixtures):
    _self_check()
    shots = [json.loads(l) for l in (fixtures / "golden_shots.jsonl").read_text().splitlines() if l.strip()]
    test = json.loads((fixtures / "golden_test_pair.json").read_text())
    shots.sort(key=lambda p: p["pair_id"])
    MT19937_64(SHOT_SEED).shuffle(shots)
    out_dir = fixtures / "goldens"
    out_dir.mkdir(exist_ok=True)
    for tid, (trailing, leading, labels) in TEMPLATES.items():
        for pos, pattern in (("trailing", trailing), ("leading", leading)):
            zero = render(pattern, test)
            blocks = []
            for s in shots:
                word = labels[0] if s["label"] == "Match" else labels[1]
                blocks.append(render(pattern, s) + " " + word)
            ten = "\n\n".join(blocks + [zero])
            (out_dir / f"{tid}_zero_{pos}.txt").write_bytes(zero.encode())
            (out_dir / f"{tid}_ten_{pos}.txt").write_bytes(ten.encode())
    print("wrote", 4 * len(TEMPLATES), "goldens to", out_dir)


if __name__ == "__main__":
    root = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "fixtures"
    main(root)
