"""Regenerates the fixture corpus in this directory.

The corpus is synthetic: a few dozen scenes assembled from templates so that
label pairs carry strongly regular predicates, most relations join
overlapping boxes, and a handful of triplets recur together often enough to
be mined as motifs at small thresholds.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

OBJECTS = [
    "man", "woman", "shirt", "pants", "hat", "horse", "dog", "elephant",
    "car", "wheel", "leg", "head", "leaf", "window", "street", "tree",
    "flower", "table", "plate", "vase", "pizza", "building",
]
PREDICATES = [
    "on", "has", "wearing", "in", "near", "of", "holding", "riding",
    "parked on", "eating", "behind", "sitting on",
]
SUPERTYPES = {
    "objects": {
        "man": "person", "woman": "person", "shirt": "clothes",
        "pants": "clothes", "hat": "clothes", "horse": "animal",
        "dog": "animal", "elephant": "animal", "car": "vehicle",
        "wheel": "part", "leg": "part", "head": "part", "leaf": "part",
        "window": "part", "street": "location", "tree": "flora",
        "flower": "flora", "table": "furniture", "plate": "artifact",
        "vase": "artifact", "pizza": "food", "building": "building",
    },
    "predicates": {
        "on": "geometric", "has": "possessive", "wearing": "possessive",
        "in": "geometric", "near": "geometric", "of": "possessive",
        "holding": "semantic", "riding": "semantic", "parked on": "geometric",
        "eating": "semantic", "behind": "geometric", "sitting on": "misc",
    },
}


class Scene:
    def __init__(self, rng, image_id):
        self.rng = rng
        self.image_id = image_id
        self.boxes = []
        self.labels = []
        self.relations = []

    def add(self, label, x, y, w, h):
        x = max(0.0, x)
        y = max(0.0, y)
        self.boxes.append([round(x, 1), round(y, 1), round(x + w, 1), round(y + h, 1)])
        self.labels.append(label)
        return len(self.boxes) - 1

    def rel(self, head, tail, predicate):
        self.relations.append([head, tail, predicate])

    def jitter(self, v, spread):
        return v + self.rng.uniform(-spread, spread)


def person(scene, ox, oy):
    r = scene.rng
    who = r.choice(["man", "woman"])
    p = scene.add(who, ox, oy, 60, 160)
    if who == "man":
        s = scene.add("shirt", scene.jitter(ox + 8, 3), scene.jitter(oy + 40, 3), 44, 50)
        scene.rel(p, s, "wearing")
        if r.random() < 0.6:
            h = scene.add("hat", scene.jitter(ox + 15, 2), oy, 30, 15)
            scene.rel(p, h, "wearing")
        hd = scene.add("head", scene.jitter(ox + 18, 2), oy + 5, 24, 26)
        scene.rel(p, hd, "has")
    else:
        pa = scene.add("pants", scene.jitter(ox + 10, 3), scene.jitter(oy + 90, 3), 40, 65)
        scene.rel(p, pa, "wearing")
    return p


def street_scene(scene):
    r = scene.rng
    st = scene.add("street", 0, 300, 640, 180)
    c = scene.add("car", scene.jitter(200, 40), 260, 180, 90)
    scene.rel(c, st, "parked on")
    for k in range(r.randint(1, 2)):
        w = scene.add("wheel", scene.boxes[c][0] + 20 + 100 * k, 320, 40, 40)
        scene.rel(c, w, "has")
    if r.random() < 0.7:
        p = person(scene, scene.jitter(450, 30), 180)
        scene.rel(p, st, "on")
        if r.random() < 0.5:
            scene.rel(p, c, "near")
    if r.random() < 0.5:
        t = scene.add("tree", 20, 40, 120, 250)
        b = scene.add("building", 100, 0, 300, 280)
        scene.rel(t, b, "near")
        if r.random() < 0.5:
            scene.rel(t, b, "behind")


def table_scene(scene):
    r = scene.rng
    tb = scene.add("table", 60, 250, 500, 200)
    pl = scene.add("plate", scene.jitter(200, 30), 280, 140, 60)
    scene.rel(pl, tb, "on")
    if r.random() < 0.8:
        pz = scene.add("pizza", scene.boxes[pl][0] + 15, 285, 110, 45)
        scene.rel(pz, pl, "on")
        if r.random() < 0.6:
            p = person(scene, 420, 100)
            scene.rel(p, pz, "eating")
            scene.rel(p, tb, "sitting on")
    if r.random() < 0.6:
        v = scene.add("vase", 420, 200, 50, 80)
        scene.rel(v, tb, "on")
        for k in range(r.randint(1, 3)):
            f = scene.add("flower", 415 + 15 * k, 150, 30, 70)
            scene.rel(f, v, "in")


def animal_scene(scene):
    r = scene.rng
    kind = r.choice(["elephant", "horse", "dog"])
    if kind == "elephant":
        e = scene.add("elephant", scene.jitter(150, 30), 100, 300, 260)
        hd = scene.add("head", scene.boxes[e][0] + 200, 110, 90, 100)
        scene.rel(e, hd, "has")
        for k in range(r.randint(1, 4)):
            lg = scene.add("leg", scene.boxes[e][0] + 20 + 60 * k, 260, 40, 100)
            scene.rel(e, lg, "has")
        if r.random() < 0.5:
            t = scene.add("tree", 480, 20, 140, 300)
            lf = scene.add("leaf", 500, 30, 30, 20)
            scene.rel(lf, t, "of")
            scene.rel(e, t, "near")
    elif kind == "horse":
        h = scene.add("horse", 180, 160, 260, 200)
        p = person(scene, 250, 20)
        scene.rel(p, h, "riding")
        scene.rel(p, h, "on")
        hd = scene.add("head", 400, 170, 50, 60)
        scene.rel(h, hd, "has")
    else:
        d = scene.add("dog", 300, 300, 120, 90)
        p = person(scene, 100, 150)
        if r.random() < 0.5:
            scene.rel(p, d, "holding")
        else:
            # Apart on purpose: a relation between non-overlapping boxes.
            scene.boxes[d] = [520.0, 380.0, 630.0, 470.0]
            scene.rel(d, p, "near")


def build_corpus(rng, n):
    graphs = []
    for i in range(n):
        scene = Scene(rng, f"img{i:03d}")
        kind = i % 4
        if kind == 0:
            street_scene(scene)
        elif kind == 1:
            table_scene(scene)
        elif kind == 2:
            animal_scene(scene)
        else:
            rng.choice([street_scene, table_scene, animal_scene])(scene)
        graphs.append(scene)
    # An image without relations.
    empty = Scene(rng, "img_empty")
    empty.add("tree", 10, 10, 100, 200)
    empty.add("building", 300, 0, 200, 300)
    graphs.append(empty)
    return graphs


def softmax_scores(rng, true_label, confidence):
    n = len(OBJECTS)
    scores = [0.0] * n
    scores[OBJECTS.index(true_label)] = confidence
    rest = 1.0 - confidence
    others = rng.sample([k for k in range(n) if OBJECTS[k] != true_label], 2)
    split = rng.uniform(0.2, 0.8)
    scores[others[0]] = rest * split
    scores[others[1]] = rest * (1 - split)
    total = sum(scores)
    return [s / total for s in scores]


def main():
    rng = random.Random(20181)
    graphs = build_corpus(rng, 60)
    ids = [g.image_id for g in graphs]
    train, test = ids[:40] + ["img_empty"], ids[40:60]

    (HERE / "vocab.json").write_text(
        json.dumps({"object_classes": OBJECTS, "predicates": PREDICATES}, indent=1) + "\n")
    (HERE / "splits.json").write_text(
        json.dumps({"train": train, "test": test}, indent=1) + "\n")
    (HERE / "supertypes.json").write_text(json.dumps(SUPERTYPES, indent=1) + "\n")
    with open(HERE / "graphs.jsonl", "w") as f:
        for g in graphs:
            f.write(json.dumps({
                "image_id": g.image_id, "width": 640, "height": 480,
                "boxes": g.boxes, "labels": g.labels, "relations": g.relations,
            }) + "\n")

    with open(HERE / "detections_sgcls.jsonl", "w") as f:
        for g in graphs:
            if g.image_id not in test:
                continue
            scores = [softmax_scores(rng, lab, rng.uniform(0.45, 0.95)) for lab in g.labels]
            f.write(json.dumps({"image_id": g.image_id, "boxes": g.boxes,
                                "class_scores": scores}) + "\n")

    with open(HERE / "detections_sgdet.jsonl", "w") as f:
        for g in graphs:
            if g.image_id not in test:
                continue
            boxes, scores = [], []
            for b, lab in zip(g.boxes, g.labels):
                w, h = b[2] - b[0], b[3] - b[1]
                dx, dy = rng.uniform(-0.08, 0.08) * w, rng.uniform(-0.08, 0.08) * h
                boxes.append([round(max(0.0, b[0] + dx), 2), round(max(0.0, b[1] + dy), 2),
                              round(b[2] + dx, 2), round(b[3] + dy, 2)])
                scores.append(softmax_scores(rng, lab, rng.uniform(0.5, 0.95)))
                if rng.random() < 0.3:
                    # Near-duplicate that per-class NMS should remove.
                    boxes.append([round(b[0] + 2, 2), round(b[1] + 2, 2),
                                  round(b[2] + 2, 2), round(b[3] + 2, 2)])
                    scores.append(softmax_scores(rng, lab, 0.4))
            boxes.append([5.0, 5.0, 45.0, 45.0])
            scores.append(softmax_scores(rng, rng.choice(OBJECTS), 0.3))
            f.write(json.dumps({"image_id": g.image_id, "boxes": boxes,
                                "class_scores": scores}) + "\n")


if __name__ == "__main__":
    main()
