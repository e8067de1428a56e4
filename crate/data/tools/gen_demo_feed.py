#!/usr/bin/env python3
"""Generates data/feeds/travel_variety.jsonl, a two-hour travel and food
variety programme with captions every ~40 s and occasional detections.

    python3 data/tools/gen_demo_feed.py > data/feeds/travel_variety.jsonl
"""

import json
import random

SEGMENTS = [
    ("Our trip starts at Tokyo station.", ["train", "station"]),
    ("We take the train to Kyoto.", ["train"]),
    ("This ramen shop has been open for fifty years.", ["ramen", "noodles"]),
    ("The chef makes tempura every morning.", ["tempura"]),
    ("Next we visit the zoo to meet an elephant.", ["elephant", "giraffe"]),
    ("The panda is eating bamboo.", ["panda"]),
    ("An onsen in the mountain is perfect in the cold weather.", ["mountain"]),
    ("Snow is falling in Hokkaido.", ["snow"]),
    ("Local kids play baseball after school.", ["baseball"]),
    ("A street singer plays guitar by the beach.", ["guitar", "beach"]),
    ("Dessert is strawberry cake and ice cream.", ["cake", "strawberry"]),
    ("The hotel has a view of the sea.", ["hotel"]),
]


def main():
    rng = random.Random(7)
    t = 5.0
    seg = 0
    out = []
    while t < 7200:
        caption, labels = SEGMENTS[seg % len(SEGMENTS)]
        out.append({"t": round(t, 1), "kind": "caption", "text": caption})
        for label in labels:
            if rng.random() < 0.7:
                t += rng.uniform(1, 8)
                out.append({"t": round(t, 1), "kind": "detection", "text": label,
                            "confidence": round(rng.uniform(0.3, 0.99), 2)})
        t += rng.uniform(25, 60)
        seg += 1
    for event in out:
        print(json.dumps(event))


if __name__ == "__main__":
    main()
