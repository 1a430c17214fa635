"""Manifest of the UCI benchmark tables and their desk-scale training profiles.

Files are not downloaded by this package. Put ``<name>.csv`` (header row,
label in the column named by ``label_col``) into a data directory, either
``$MLLP_DATA_DIR`` or ``data/`` at the repository root. ``columns`` lists the
expected feature columns in file order; ``schema`` pins column kinds that
inference alone would get wrong.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .binarizer import CATEGORICAL, CONTINUOUS

DATA_ENV = "MLLP_DATA_DIR"


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    label_col: str
    columns: tuple[str, ...]
    kinds: str  # "continuous", "categorical" or "mixed"
    n_instances: int
    n_classes: int
    reference_features: int  # binary feature count after global discretization, reference setup
    reference_f1: float  # CRS macro-F1 (%) in the reference results
    cleaning: str = "rows with missing values removed"
    schema: dict[str, str] = field(default_factory=dict)
    desk: dict = field(default_factory=dict)  # experiment overrides for runs of a few minutes


def _cat(cols):
    return {c: CATEGORICAL for c in cols}


def _cont(cols):
    return {c: CONTINUOUS for c in cols}


_ADULT = ("age", "workclass", "fnlwgt", "education", "education-num", "marital-status", "occupation",
          "relationship", "race", "sex", "capital-gain", "capital-loss", "hours-per-week", "native-country")
_BANK = ("age", "job", "marital", "education", "default", "balance", "housing", "loan", "contact", "day",
         "month", "duration", "campaign", "pdays", "previous", "poutcome")
_CHESS = ("white-king-file", "white-king-rank", "white-rook-file", "white-rook-rank",
          "black-king-file", "black-king-rank")
_CONNECT4 = tuple(f"{f}{r}" for f in "abcdefg" for r in range(1, 7))
_LETTER = ("x-box", "y-box", "width", "high", "onpix", "x-bar", "y-bar", "x2bar", "y2bar", "xybar",
           "x2ybr", "xy2br", "x-ege", "xegvy", "y-ege", "yegvx")
_MAGIC = ("fLength", "fWidth", "fSize", "fConc", "fConc1", "fAsym", "fM3Long", "fM3Trans", "fAlpha", "fDist")
_MUSHROOM = ("cap-shape", "cap-surface", "cap-color", "bruises", "odor", "gill-attachment", "gill-spacing",
             "gill-size", "gill-color", "stalk-shape", "stalk-root", "stalk-surface-above-ring",
             "stalk-surface-below-ring", "stalk-color-above-ring", "stalk-color-below-ring", "veil-type",
             "veil-color", "ring-number", "ring-type", "spore-print-color", "population", "habitat")
_NURSERY = ("parents", "has_nurs", "form", "children", "housing", "finance", "social", "health")
_TTT = ("top-left", "top-middle", "top-right", "middle-left", "middle-middle", "middle-right",
        "bottom-left", "bottom-middle", "bottom-right")
_WINE = ("alcohol", "malic-acid", "ash", "alcalinity-of-ash", "magnesium", "total-phenols", "flavanoids",
         "nonflavanoid-phenols", "proanthocyanins", "color-intensity", "hue", "od280-od315", "proline")

DATASETS: dict[str, DatasetSpec] = {d.name: d for d in [
    DatasetSpec("adult", "class", _ADULT, "mixed", 32561, 2, 155, 80.95,
                cleaning="UCI adult.data; rows containing '?' removed"),
    DatasetSpec("bank-marketing", "y", _BANK, "mixed", 45211, 2, 88, 73.34,
                cleaning="UCI bank-full.csv converted to comma separators; 'unknown' kept as a category",
                schema=_cat(("day",))),
    DatasetSpec("banknote", "class", ("variance", "skewness", "curtosis", "entropy"), "continuous",
                1372, 2, 17, 94.93, cleaning="none needed"),
    DatasetSpec("blogger", "pb", ("degree", "caprice", "topic", "lmt", "lpss"), "categorical",
                100, 2, 15, 85.33, cleaning="none needed",
                schema=_cat(("degree", "caprice", "topic", "lmt", "lpss")),
                desk={"hidden": 32, "epochs": 300, "batch_size": 32}),
    DatasetSpec("chess", "depth", _CHESS, "categorical", 28056, 18, 40, 80.21,
                cleaning="UCI krkopt.data; ranks treated as categories", schema=_cat(_CHESS)),
    DatasetSpec("connect-4", "class", _CONNECT4, "categorical", 67557, 3, 126, 65.88,
                cleaning="none needed", schema=_cat(_CONNECT4)),
    DatasetSpec("letRecog", "lettr", _LETTER, "continuous", 20000, 26, 155, 84.96,
                cleaning="UCI letter-recognition.data; label moved to a named column", schema=_cont(_LETTER)),
    DatasetSpec("magic04", "class", _MAGIC, "continuous", 19020, 2, 79, 80.87, cleaning="none needed"),
    DatasetSpec("mushroom", "class", _MUSHROOM, "categorical", 8124, 2, 117, 100.00,
                cleaning="rows with a missing stalk-root removed (5644 remain)", schema=_cat(_MUSHROOM),
                desk={"hidden": 64, "epochs": 40, "rb_grid": (0.8,)}),
    DatasetSpec("nursery", "class", _NURSERY, "categorical", 12960, 5, 27, 99.69,
                cleaning="none needed", schema=_cat(_NURSERY),
                desk={"hidden": 64, "epochs": 40, "rb_grid": (0.8,)}),
    DatasetSpec("tic-tac-toe", "class", _TTT, "categorical", 958, 2, 27, 99.77,
                cleaning="none needed", schema=_cat(_TTT),
                desk={"hidden": 64, "epochs": 200}),
    DatasetSpec("wine", "class", _WINE, "continuous", 178, 3, 37, 97.78,
                cleaning="label moved to the last column", schema=_cont(_WINE),
                desk={"hidden": 128, "epochs": 200, "batch_size": 32}),
]}


def data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "data"


def dataset_path(name: str) -> Path:
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; known: {sorted(DATASETS)}")
    return data_dir() / f"{name}.csv"


def available(name: str) -> bool:
    return dataset_path(name).is_file()


def desk_config(name: str, seed: int = 0, out: str | None = None, **overrides):
    """Experiment config for a manifest dataset at its desk-scale profile.

    ``overrides`` may name any ExperimentConfig field or training override;
    training overrides go into ``train``.
    """
    from .harness import ExperimentConfig, TRAIN_FIELDS

    spec = DATASETS[name]
    settings = dict(spec.desk)
    settings.update(overrides)
    train = {k: settings.pop(k) for k in list(settings) if k in TRAIN_FIELDS}
    return ExperimentConfig(str(dataset_path(name)), spec.label_col, dict(spec.schema), seed=seed,
                            train=train, out=out, **settings)
