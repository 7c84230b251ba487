"""Regenerates the checked-in activation fixtures.

Written with numpy and h5py only, so the C++ reader is exercised against
files it did not produce itself.

    python3 tests/fixtures/generate.py
"""
import json
from pathlib import Path

import h5py
import numpy as np

HERE = Path(__file__).resolve().parent
LAYERS = 2
WIDTH = 8
# layer 1, index 3 fires on -ing words; layer 0, index 5 on numbers
ING_NEURON = (1, 3)
NUM_NEURON = (0, 5)

NOUNS = ["cat", "dog", "river", "house", "table", "garden", "teacher", "window"]
VERBS = ["running", "eating", "singing", "walking", "reading", "sleeping"]
NUMBERS = ["3", "17", "42", "2019", "7.5", "100"]
FILLER = ["the", "a", "near", "with", "and", "<b>", "R&D"]


def tag(word):
    if word.endswith("ing"):
        return "VBG"
    if any(ch.isdigit() for ch in word):
        return "CD"
    return "NN"


def sentences(rng, count):
    pools = NOUNS + VERBS + NUMBERS + FILLER
    out = []
    for _ in range(count):
        length = int(rng.integers(4, 9))
        out.append([pools[int(i)] for i in rng.integers(0, len(pools), size=length)])
    return out


def word_activations(rng, words):
    acts = rng.normal(0.0, 0.5, size=(LAYERS, len(words), WIDTH)).astype(np.float32)
    for t, w in enumerate(words):
        if tag(w) == "VBG":
            acts[ING_NEURON[0], t, ING_NEURON[1]] += 3.0
        if tag(w) == "CD":
            acts[NUM_NEURON[0], t, NUM_NEURON[1]] -= 3.0
    return acts


def wordpiece(words):
    pieces, index, special = ["[CLS]"], [-1], [True]
    for i, w in enumerate(words):
        parts = [w] if len(w) <= 5 else [w[:3], "##" + w[3:]]
        for p in parts:
            pieces.append(p)
            index.append(i)
            special.append(False)
    pieces.append("[SEP]")
    index.append(-1)
    special.append(True)
    return pieces, index, special


def write_hdf5(path, corpus, tensors, dtype):
    with h5py.File(path, "w") as f:
        mapping = {}
        for i, (words, acts) in enumerate(zip(corpus, tensors)):
            d = f.create_dataset(str(i), data=acts.astype(dtype))
            d.attrs["tokens"] = json.dumps(words)
            mapping.setdefault(" ".join(words), str(i))
        f.create_dataset("sentence_to_index", data=[json.dumps(mapping)], dtype=h5py.string_dtype())


def write_json(path, corpus, tensors):
    with open(path, "w", encoding="utf-8") as out:
        for i, (words, acts) in enumerate(zip(corpus, tensors)):
            features = []
            for t, w in enumerate(words):
                layers = [{"index": l, "values": [float(v) for v in acts[l, t]]} for l in range(acts.shape[0])]
                features.append({"token": w, "layers": layers})
            out.write(json.dumps({"linex_index": i, "features": features}) + "\n")


def main():
    rng = np.random.default_rng(7)
    corpus = sentences(rng, 24)
    tensors = [word_activations(rng, words) for words in corpus]

    (HERE / "corpus.txt").write_text("".join(" ".join(s) + "\n" for s in corpus), encoding="utf-8")
    (HERE / "tags.txt").write_text("".join(" ".join(tag(w) for w in s) + "\n" for s in corpus), encoding="utf-8")
    write_hdf5(HERE / "word_acts.hdf5", corpus, tensors, "f4")
    write_hdf5(HERE / "word_acts_f16.hdf5", corpus, tensors, "f2")
    write_json(HERE / "word_acts.json", corpus, tensors)

    maps, sub_corpus, sub_tensors = [], [], []
    for words, acts in zip(corpus, tensors):
        pieces, index, special = wordpiece(words)
        sub = rng.normal(0.0, 0.5, size=(LAYERS, len(pieces), WIDTH)).astype(np.float32)
        for p, w in enumerate(index):
            if w >= 0 and not pieces[p].startswith("##"):
                sub[:, p, :] = acts[:, w, :]
        maps.append({"subwords": pieces, "word_index": index, "special": special})
        sub_corpus.append(pieces)
        sub_tensors.append(sub)
    write_hdf5(HERE / "subword_acts.hdf5", sub_corpus, sub_tensors, "f4")
    (HERE / "subword_acts.hdf5.map.json").write_text(
        json.dumps({"scheme": "wordpiece", "sentences": maps}) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
