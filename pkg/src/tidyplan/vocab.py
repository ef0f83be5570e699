"""Simulator vocabulary: room kinds, their receptacles, object footprints, and the bundled prior table."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

ROOM_KINDS = ("living", "bedroom", "bathroom", "kitchen")

# (receptacle name, openable); three surfaces and one container per room
ROOM_RECEPTACLES: dict[str, tuple[tuple[str, bool], ...]] = {
    "kitchen": (("counter", False), ("dining_table", False), ("fridge", True), ("cabinet", True)),
    "living": (("sofa", False), ("coffee_table", False), ("tv_stand", False), ("drawer", True)),
    "bedroom": (("bed", False), ("desk", False), ("dresser", False), ("wardrobe", True)),
    "bathroom": (("sink", False), ("shelf", False), ("bathtub", False), ("cabinet", True)),
}

# footprints in cells (w, h) for objects larger than one cell; the rest are 1x1
OBJECT_SIZES: dict[str, tuple[int, int]] = {
    "laptop": (2, 1),
    "blanket": (2, 1),
    "pan": (2, 1),
    "kettle": (1, 2),
    "plant": (1, 2),
    "teddy_bear": (2, 1),
    "box": (2, 2),
    "newspaper": (2, 1),
    "towel": (2, 1),
    "jacket": (2, 1),
}


# coarse kind of each household object; stands in for the semantic similarity a
# pretrained word embedding would supply, so related objects share features
OBJECT_CATEGORIES: dict[str, str] = {
    **dict.fromkeys(("apple", "bread", "banana", "tomato", "lettuce"), "food"),
    **dict.fromkeys(("bowl", "mug", "plate", "kettle", "pan"), "kitchenware"),
    **dict.fromkeys(("vase", "candle", "statue", "plant", "photo_frame"), "decor"),
    **dict.fromkeys(("pillow", "blanket", "shirt", "jacket", "hat"), "clothing"),
    **dict.fromkeys(("soap", "towel", "toothbrush", "shampoo", "sponge"), "toiletry"),
    **dict.fromkeys(("laptop", "phone", "remote", "headphones", "tablet"), "electronics"),
    **dict.fromkeys(("book", "notebook", "pen", "newspaper", "magazine"), "reading"),
    **dict.fromkeys(("teddy_bear", "ball", "toy_car", "box", "puzzle"), "toy"),
}


def object_category(label: str) -> str | None:
    return OBJECT_CATEGORIES.get(label)


def object_size(label: str) -> tuple[int, int]:
    return OBJECT_SIZES.get(label, (1, 1))


def room_receptacle_label(room_kind: str, name: str) -> str:
    return f"{room_kind}|{name}"


@dataclass(frozen=True)
class PriorRow:
    object_label: str
    room_receptacle_label: str
    probable: bool
    score: float


def default_prior_path() -> Path:
    return Path(str(resources.files("tidyplan") / "data" / "orr_prior.csv"))


def load_prior_table(path: str | Path | None = None) -> list[PriorRow]:
    """Read an object/room-receptacle prior CSV (object_label, room_receptacle_label, class, score)."""
    path = default_prior_path() if path is None else Path(path)
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            cls = rec["class"].strip().lower()
            if cls not in ("probable", "implausible"):
                raise ValueError(f"unknown class {cls!r} in {path}")
            score = float(rec["score"])
            if cls == "implausible" and score != 0.0:
                raise ValueError(f"implausible pair with non-zero score: {rec}")
            rows.append(PriorRow(rec["object_label"], rec["room_receptacle_label"], cls == "probable", score))
    return rows


@lru_cache(maxsize=4)
def _bundled_lookup() -> dict[tuple[str, str], float]:
    return {(r.object_label, r.room_receptacle_label): r.score for r in load_prior_table()}


def prior_score(object_label: str, rr_label: str) -> float:
    """Ground-truth placement score from the bundled table (0 for implausible or unknown pairs)."""
    return _bundled_lookup().get((object_label, rr_label), 0.0)


@lru_cache(maxsize=1)
def object_vocabulary() -> tuple[str, ...]:
    return tuple(sorted({r.object_label for r in load_prior_table()}))
