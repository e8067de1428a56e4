#!/usr/bin/env python3
"""Generates data/vectors.txt: small topic-clustered word vectors.

Each topic owns one axis; a word is a weighted sum of topic axes plus seeded
Gaussian noise, so words in the same topic sit close together and words in
different topics are roughly 2.5-3 apart. Run from the repository root:

    python3 data/tools/gen_vectors.py > data/vectors.txt
"""

import random

DIM = 16
TOPIC_WEIGHT = 2.0
NOISE = 0.22

TOPICS = [
    "animal", "food", "travel", "tech", "business", "daily", "sports", "affect",
    "media", "weather", "music", "chat", "time", "people",
]

WORDS = {
    "animal": "elephant giraffe lion tiger panda dog dogs cat cats bird birds zoo animal animals horse "
              "monkey penguin bear whale",
    "food": "food ramen sushi curry delicious dinner lunch breakfast cake tempura noodles restaurant "
            "cooking recipe hungry taste strawberry chocolate",
    "travel": "travel kyoto tokyo osaka trip hotel beach mountain station train visit onsen hokkaido "
              "okinawa abroad",
    "tech": "internet online computer smartphone phone app website technology robot robots ai chip",
    "business": "deal agreement buy sell acquisition trillion yen company market stock price "
                "billion money cheap expensive announced",
    "daily": "home family house room morning weekend work tired sleep bath cleaning shopping wonder",
    "sports": "baseball soccer game team player batting score match tennis marathon olympics",
    "affect": "happy fun interesting incredible wow great nice amazing enjoy favorite cute",
    "media": "tv program drama movie movies show anime episode camera documentary history",
    "weather": "weather rain sunny snow hot cold typhoon",
    "music": "music song songs singer concert guitar",
    "chat": "yes really right sure maybe",
    "time": "time months today tomorrow year years later",
    "people": "friends people kids mother father",
}

# Words that blend several topics, and the template anchors.
MIXED = {
    "like": {"affect": 2.0, "animal": 1.3},
    "love": {"affect": 2.0, "people": 0.9},
    "eat": {"food": 2.0, "affect": 0.3},
    "go": {"travel": 2.0},
    "see": {"media": 2.0, "tech": 0.8},
    "seen": {"media": 2.0, "tech": 1.0},
    "watch": {"media": 2.0, "sports": 0.6},
    "play": {"sports": 2.0, "music": 0.5},
    "listen": {"music": 2.0},
    "sometime": {"time": 1.4, "daily": 1.4},
    "close": {"time": 1.4, "business": 1.4},
    "expected": {"time": 1.2, "business": 1.2},
    "cnet": {"tech": 1.5, "business": 1.5},
    "nvidia": {"tech": 1.6, "business": 1.4},
    "arm": {"tech": 1.6, "business": 1.4},
    "softbank": {"business": 1.8, "tech": 1.0},
    "oracle": {"business": 1.6, "tech": 1.4},
    "tiktok": {"tech": 1.6, "media": 1.2},
    "twitter": {"tech": 1.6, "media": 1.2},
    "news": {"business": 1.5, "media": 1.5},
    "japan": {"travel": 1.6, "business": 1.0},
    "ice cream": {"food": 2.0, "weather": 0.6},
    "hot spring": {"travel": 1.8, "weather": 0.6},
}


def main():
    rng = random.Random(20201016)
    rows = []
    for topic, words in WORDS.items():
        for w in words.split():
            rows.append((w, {topic: TOPIC_WEIGHT}))
    rows.extend(MIXED.items())
    print(len(rows), DIM)
    for word, mix in rows:
        v = [rng.gauss(0.0, NOISE) for _ in range(DIM)]
        for topic, weight in mix.items():
            v[TOPICS.index(topic)] += weight
        print(word, " ".join(f"{x:.6f}" for x in v))


if __name__ == "__main__":
    main()
