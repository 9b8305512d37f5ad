#!/usr/bin/env python3
"""Writes the offline replay fixtures under tests/fixtures/profile/.

Instance files are JSON Lines in the cogsteer instance schema. store.jsonl
holds one recorded chat-completion reply per request, keyed by the sha256 of
the compact request body exactly as the C++ client serialises it. Answers are
assigned so that the aggregate metrics hit fixed target counts.
"""

import argparse
import hashlib
import json
import random
from pathlib import Path

SYSTEM_PROMPT = "You are a helpful assistant. Answer the following question carefully."
TIMESTAMP = "2025-01-15T12:00:00Z"

MODELS = {
    "gpt": "gpt-4o-mini-2024-07-18",
    "llama": "meta-llama/Llama-3.3-70B-Instruct-Turbo",
    "qwen": "Qwen/Qwen2.5-72B-Instruct-Turbo",
}

JUDGMENT_CATEGORIES = ["base_rate", "anchoring", "sunk_cost", "status_quo"]
JUDGMENT_OPTIONS = [f"{10 * i}%" for i in range(11)]
ROLES = ["marketing manager", "supply chain manager", "product director", "finance lead", "operations analyst"]
COMPANIES = ["CleanWave Inc", "MedEquip Corp", "BrightPath Ltd", "NorthStar Foods", "Helix Robotics"]
PRODUCTS = ["water filter", "infusion pump", "tutoring app", "frozen meal line", "warehouse robot"]
ANCHORS = ["A colleague mentioned a figure of 90% in passing.",
           "Last year's unrelated survey reported 85%.",
           "The team has already spent two years on this project.",
           "The current supplier has been used for a decade."]

SURVEY_QUESTIONS = ["Which factor matters most when choosing a new phone?",
                    "What is the best way to spend a free afternoon?",
                    "Which policy should a city prioritise?",
                    "What should a first-time manager focus on?",
                    "Which quality matters most in a teammate?"]
SURVEY_OPTIONS = [["Price", "Battery life", "Camera", "Brand"],
                  ["Reading", "Exercise", "Meeting friends", "Resting"],
                  ["Public transit", "Housing", "Parks", "Safety"],
                  ["Listening", "Planning", "Delegating", "Feedback"],
                  ["Reliability", "Creativity", "Humour", "Experience"]]

BIAS_SALIENT = "Go with your first impression and let the most salient detail guide you."
DEBIAS = "Think carefully and base your decision only on objective facts."


def request_body(model, prompt, max_tokens):
    return {
        "model": model,
        "messages": [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": prompt}],
        "temperature": 0.0,
        "top_p": 1.0,
        "max_tokens": max_tokens,
    }


def compact(obj):
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def reply_body(content, finish="stop"):
    return compact({"choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}]})


class Store:
    def __init__(self):
        self.entries = {}

    def add(self, model, prompt, content, max_tokens=512, finish="stop"):
        req = request_body(model, prompt, max_tokens)
        key = hashlib.sha256(compact(req).encode("utf-8")).hexdigest()
        assert key not in self.entries, "duplicate request"
        self.entries[key] = {"key": key, "request": req, "response": reply_body(content, finish),
                             "timestamp": TIMESTAMP}

    def add_answer(self, model, prompt, content, truncate):
        # truncated first reply, recovered on the next max_tokens rung
        if truncate:
            self.add(model, prompt, "Let me weigh each consideration in turn. First,", 512, "length")
            self.add(model, prompt, content, 1024)
        else:
            self.add(model, prompt, content)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for key in sorted(self.entries):
                f.write(compact(self.entries[key]) + "\n")


def judgment_instances(name, n, prefix, rng):
    out = []
    for i in range(n):
        role, company, product = rng.choice(ROLES), rng.choice(COMPANIES), rng.choice(PRODUCTS)
        body = (f"You are the {role} of {company}. Estimate the probability that the new {product} "
                f"reaches its sales target this year (case {i + 1}).")
        listing = "Options: " + ", ".join(f"Option {k + 1}: {o}" for k, o in enumerate(JUDGMENT_OPTIONS))
        tail = "Answer with 'Option k' for the chosen k between 1 and 11."
        control = f"{body}\n{listing}\n{tail}"
        treatment = f"{body} {ANCHORS[i % len(ANCHORS)]}\n{listing}\n{tail}"
        if prefix:
            control, treatment = f"{prefix}\n\n{control}", f"{prefix}\n\n{treatment}"
        out.append({
            "id": f"{name}-{i:04d}",
            "family": "Judgment",
            "category": JUDGMENT_CATEGORIES[i % len(JUDGMENT_CATEGORIES)],
            "variants": {"control": control, "treatment": treatment},
            "options": JUDGMENT_OPTIONS,
        })
    return out


def response_instances(name, n, prefix, rng):
    out = []
    for i in range(n):
        q = i % len(SURVEY_QUESTIONS)
        opts = SURVEY_OPTIONS[q]
        variants = {}
        for r in range(4):
            rot = opts[r:] + opts[:r]
            lines = "\n".join(f"{chr(ord('A') + k)}. {o}" for k, o in enumerate(rot))
            text = f"{SURVEY_QUESTIONS[q]} (survey item {i + 1})\n{lines}\nAnswer with a single letter."
            variants[f"perm{r}"] = f"{prefix}\n\n{text}" if prefix else text
        out.append({"id": f"{name}-{i:04d}", "family": "Response", "category": "response_formation",
                    "variants": variants, "options": opts})
    return out


def judgment_answers(n, rng, shift_sum=None, same=None):
    """(control, treatment) option numbers with sum(t - c) == shift_sum or
    #(t == c) == same."""
    controls = [rng.randint(3, 9) for _ in range(n)]
    diffs = [0] * n
    if shift_sum is not None:
        step = -1 if shift_sum < 0 else 1
        order = list(range(n))
        rng.shuffle(order)
        for k in range(abs(shift_sum)):
            diffs[order[k % n]] += step
        # a few offsetting moves so not every nonzero shift has the same sign
        for a, b in zip(order[-6::2], order[-5::2]):
            diffs[a] += 1
            diffs[b] -= 1
    else:
        moved = rng.sample(range(n), n - same)
        for i in moved:
            diffs[i] = rng.choice([-2, -1, 1, 2])
    pairs = []
    for c, d in zip(controls, diffs):
        t = c + d
        assert 1 <= t <= 11
        pairs.append((c, t))
    if shift_sum is not None:
        assert sum(t - c for c, t in pairs) == shift_sum
    else:
        assert sum(1 for c, t in pairs if c == t) == same
    return pairs


def response_answers(n_positions, first, rng):
    chosen = set(rng.sample(range(n_positions), first))
    return [0 if i in chosen else rng.randint(1, 3) for i in range(n_positions)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests/fixtures/profile"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    store = Store()
    targets = {}

    def emit(name, instances):
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as f:
            for inst in instances:
                f.write(compact(inst) + "\n")

    def record_judgment(name, instances, model_key, pairs):
        for idx, (inst, (c, t)) in enumerate(zip(instances, pairs)):
            truncate = idx in (3, 41)
            store.add_answer(MODELS[model_key], inst["variants"]["control"], f"Option {c}", truncate)
            store.add_answer(MODELS[model_key], inst["variants"]["treatment"], f"Option {t}", False)

    def record_response(name, instances, model_key, picks):
        it = iter(picks)
        for idx, inst in enumerate(instances):
            for cond in sorted(inst["variants"]):
                truncate = idx in (7,) and cond == "perm2"
                store.add_answer(MODELS[model_key], inst["variants"][cond], chr(ord("A") + next(it)), truncate)

    # vanilla prompting, three models
    jv = judgment_instances("judgment_vanilla", 100, "", rng)
    rv = response_instances("response_vanilla", 250, "", rng)
    emit("judgment_vanilla", jv)
    emit("response_vanilla", rv)
    for key, shift, first in (("gpt", -43, 790), ("llama", -77, 771), ("qwen", -27, 776)):
        record_judgment("judgment_vanilla", jv, key, judgment_answers(100, rng, shift_sum=shift))
        record_response("response_vanilla", rv, key, response_answers(1000, first, rng))
        targets[key] = {"judgment_mean_shift_pp": shift * 10 / 100, "response_p_first": first / 1000}

    # bias-salient versus debiasing guidance, one model
    jb = judgment_instances("judgment_biased", 250, BIAS_SALIENT, rng)
    jn = judgment_instances("judgment_neutral", 250, DEBIAS, rng)
    rb = response_instances("response_biased", 500, BIAS_SALIENT, rng)
    rn = response_instances("response_neutral", 500, DEBIAS, rng)
    for name, inst in (("judgment_biased", jb), ("judgment_neutral", jn), ("response_biased", rb),
                       ("response_neutral", rn)):
        emit(name, inst)
    record_judgment("judgment_biased", jb, "gpt", judgment_answers(250, rng, same=175))
    record_judgment("judgment_neutral", jn, "gpt", judgment_answers(250, rng, same=164))
    record_response("response_biased", rb, "gpt", response_answers(2000, 1562, rng))
    record_response("response_neutral", rn, "gpt", response_answers(2000, 1157, rng))

    store.write(out / "store.jsonl")
    print(f"{len(store.entries)} recorded replies in {out / 'store.jsonl'}")


if __name__ == "__main__":
    main()
