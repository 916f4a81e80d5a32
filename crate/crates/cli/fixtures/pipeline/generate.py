"""Regenerates the synthetic pipeline fixture in this directory.

Each video has a latent scene (subject, verb, object, adjective and an
intransitive action). Captions are rendered from templates as CoNLL-U, and
the video features are indicator vectors of the scene plus noise, so the
model has something learnable. Run from this directory; output is fixed by
the seed below.
"""

import json
import random

rng = random.Random(20240611)

SUBJECTS = ["man", "woman", "dog"]
OBJECTS = ["ball", "paper", "car", "guitar"]
VERBS = {"hold": "holding", "fold": "folding", "drive": "driving", "play": "playing", "push": "pushing"}
VERB_3SG = {"run": "runs", "stand": "stands", "hold": "holds", "push": "pushes"}
ADJECTIVES = ["red", "white", "small"]
INTRANSITIVE = ["run", "stand"]
FEATURE_ITEMS = SUBJECTS + OBJECTS + list(VERBS) + ADJECTIVES + INTRANSITIVE
FEATURE_DIM = len(FEATURE_ITEMS) + 3


def sentence(tokens, text):
    rows = [f"# text = {text}"]
    for i, (form, lemma, upos, head, rel) in enumerate(tokens, 1):
        rows.append("\t".join([str(i), form, lemma, upos, "_", "_", str(head), rel, "_", "_"]))
    return "\n".join(rows) + "\n"


def transitive(s, v, o, a):
    toks = [("A", "a", "DET", 2, "det"), (s, s, "NOUN", 4, "nsubj"), ("is", "be", "AUX", 4, "aux"),
            (VERBS[v], v, "VERB", 0, "root"), ("a", "a", "DET", 7, "det"), (a, a, "ADJ", 7, "amod"),
            (o, o, "NOUN", 4, "obj"), (".", ".", "PUNCT", 4, "punct")]
    return sentence(toks, f"A {s} is {VERBS[v]} a {a} {o} .")


def attribute(o, a):
    toks = [("The", "the", "DET", 2, "det"), (o, o, "NOUN", 4, "nsubj"), ("is", "be", "AUX", 4, "cop"),
            (a, a, "ADJ", 0, "root"), (".", ".", "PUNCT", 4, "punct")]
    return sentence(toks, f"The {o} is {a} .")


def intransitive(s, iv):
    toks = [("A", "a", "DET", 2, "det"), (s, s, "NOUN", 3, "nsubj"), (VERB_3SG[iv], iv, "VERB", 0, "root"),
            (".", ".", "PUNCT", 3, "punct")]
    return sentence(toks, f"A {s} {VERB_3SG[iv]} .")


def scene():
    s = rng.choice(SUBJECTS)
    v = rng.choice(list(VERBS))
    o = rng.choice(OBJECTS)
    return {"s": s, "v": v, "o": o, "a": rng.choice(ADJECTIVES), "iv": rng.choice(INTRANSITIVE)}


videos = [(f"vid{i:02d}", scene()) for i in range(1, 13)]
blocks, vmap, features = [], [], []
for vid, sc in videos:
    captions = [transitive(sc["s"], sc["v"], sc["o"], sc["a"]), attribute(sc["o"], sc["a"]), intransitive(sc["s"], sc["iv"])]
    for c in captions:
        vmap.append(f"{len(blocks)}\t{vid}")
        blocks.append(c)
    active = {sc["s"], sc["v"], sc["o"], sc["a"], sc["iv"]}
    vec = [(1.0 if item in active else 0.0) + round(rng.uniform(-0.1, 0.1), 4) for item in FEATURE_ITEMS]
    vec += [round(rng.uniform(-0.1, 0.1), 4) for _ in range(3)]
    features.append({"video_id": vid, "features": [round(x, 4) for x in vec]})

with open("captions.conllu", "w") as f:
    f.write("\n".join(blocks))
with open("video_map.tsv", "w") as f:
    f.write("# sentence_index\tvideo_id\n" + "\n".join(vmap) + "\n")
with open("features.jsonl", "w") as f:
    for row in features:
        f.write(json.dumps(row) + "\n")


def syn(id_, lemmas, pos, gloss, hyper=()):
    return {"id": id_, "lemmas": lemmas, "pos": pos, "gloss": gloss, "hypernyms": list(hyper)}


ontology = {"synsets": [
    syn("organism.n.01", ["organism", "being"], "noun", "a living thing that can act or function independently"),
    syn("person.n.01", ["person", "individual"], "noun", "a human being", ["organism.n.01"]),
    syn("male.n.02", ["male"], "noun", "a person who belongs to the sex that cannot have babies", ["person.n.01"]),
    syn("female.n.02", ["female"], "noun", "a person who belongs to the sex that can have babies", ["person.n.01"]),
    syn("man.n.01", ["man"], "noun", "an adult person who is male", ["person.n.01", "male.n.02"]),
    syn("woman.n.01", ["woman"], "noun", "an adult female person", ["person.n.01", "female.n.02"]),
    syn("animal.n.01", ["animal"], "noun", "a living organism that can move", ["organism.n.01"]),
    syn("dog.n.01", ["dog"], "noun", "a domesticated canine animal kept as a pet", ["animal.n.01"]),
    syn("equipment.n.01", ["equipment"], "noun", "things used in games and sport"),
    syn("ball.n.01", ["ball"], "noun", "a round object used in games and sport", ["equipment.n.01"]),
    syn("ball.n.02", ["ball"], "noun", "a lavish formal dance party"),
    syn("material.n.01", ["material"], "noun", "the stuff from which things are made"),
    syn("paper.n.01", ["paper"], "noun", "a thin material made of cellulose pulp for writing", ["material.n.01"]),
    syn("vehicle.n.01", ["vehicle"], "noun", "a conveyance that transports people or objects"),
    syn("car.n.01", ["car", "auto"], "noun", "a motor vehicle with four wheels", ["vehicle.n.01"]),
    syn("instrument.n.01", ["instrument"], "noun", "a device that makes music"),
    syn("guitar.n.01", ["guitar"], "noun", "a stringed musical instrument", ["instrument.n.01"]),
    syn("change.v.01", ["change"], "verb", "cause to become different"),
    syn("fold.v.01", ["fold"], "verb", "bend paper so that one part covers the other", ["change.v.01"]),
    syn("keep.v.01", ["keep"], "verb", "retain possession of something"),
    syn("hold.v.01", ["hold"], "verb", "have or keep in the hands", ["keep.v.01"]),
    syn("operate.v.01", ["operate"], "verb", "handle and cause to function"),
    syn("drive.v.01", ["drive"], "verb", "operate a car or vehicle", ["operate.v.01"]),
    syn("move.v.01", ["move"], "verb", "change location or cause to move"),
    syn("push.v.01", ["push"], "verb", "move something away by pressure", ["move.v.01"]),
    syn("run.v.01", ["run"], "verb", "move fast using the legs", ["move.v.01"]),
    syn("perform.v.01", ["perform"], "verb", "give a performance of music"),
    syn("play.v.01", ["play"], "verb", "participate in games or sport with a ball"),
    syn("play.v.02", ["play"], "verb", "perform music on a musical instrument such as a guitar", ["perform.v.01"]),
    syn("stand.v.01", ["stand"], "verb", "be upright on the feet"),
    syn("red.a.01", ["red"], "adj", "of the color of blood"),
    syn("white.a.01", ["white"], "adj", "of the color of snow or milk"),
    syn("small.a.01", ["small"], "adj", "limited in size"),
]}
with open("ontology.json", "w") as f:
    json.dump(ontology, f, indent=1)
    f.write("\n")

# Word vectors: words of one topic share a base direction.
TOPICS = {
    "sport": ["ball", "games", "sport", "round", "object", "used", "participate", "equipment"],
    "music": ["guitar", "music", "musical", "instrument", "stringed", "perform", "performance", "device", "makes"],
    "dance": ["dance", "formal", "lavish", "party"],
    "people": ["man", "woman", "person", "human", "male", "female", "adult", "sex", "babies", "individual"],
    "motion": ["car", "vehicle", "drive", "driving", "motor", "wheels", "move", "moves", "fast", "legs", "conveyance"],
    "paper": ["paper", "material", "cellulose", "pulp", "writing", "fold", "folding", "bend", "thin"],
}
DIM = 8
bases = {t: [rng.gauss(0, 1) for _ in range(DIM)] for t in TOPICS}
vectors = {}
for topic, words in TOPICS.items():
    for w in words:
        vectors[w] = [b + rng.gauss(0, 0.2) for b in bases[topic]]
extra = set()
for s in ontology["synsets"]:
    extra.update(s["gloss"].split())
for b in blocks:
    for line in b.splitlines():
        if not line.startswith("#"):
            extra.add(line.split("\t")[1].lower())
for w in sorted(extra):
    if w.isalpha() and w not in vectors:
        vectors[w] = [rng.gauss(0, 0.3) for _ in range(DIM)]
with open("embeddings.txt", "w") as f:
    f.write(f"{len(vectors)} {DIM}\n")
    for w in sorted(vectors):
        f.write(w + " " + " ".join(f"{x:.4f}" for x in vectors[w]) + "\n")
