"""Hyperparameter grids and the published per-dataset selections."""
from __future__ import annotations

DEFAULT_ALPHAS = tuple(round(5.0 - 0.5 * i, 10) for i in range(10))  # 5.0 .. 0.5
EXTRA_ALPHAS = (0.1, 1.15, 2.1, 2.5)  # values that appear in the published selections
EXTENDED_ALPHAS = tuple(sorted(set(DEFAULT_ALPHAS) | set(EXTRA_ALPHAS), reverse=True))

# per part: (k_f, alpha); None marks a part absent from the dataset
PFM_SELECTIONS = {
    "DISFA": {
        "left_eyebrow": (5, 1.15), "right_eyebrow": (5, 1.15),
        "left_eye": (5, 0.5), "right_eye": (5, 0.5),
        "jawline": (5, 2.0), "nose": (5, 1.0), "lips": (5, 1.5),
    },
    "BP4D": {
        "left_eyebrow": (5, 2.5), "right_eyebrow": (5, 2.5),
        "left_eye": (4, 0.5), "right_eye": (3, 0.5),
        "jawline": None, "nose": (5, 2.0), "lips": (5, 3.0),
    },
    "CK+": {
        "left_eyebrow": (5, 2.0), "right_eyebrow": (5, 2.0),
        "left_eye": (4, 0.5), "right_eye": (4, 1.0),
        "jawline": (4, 0.5), "nose": (5, 2.0), "lips": (3, 2.1),
    },
}

# (q, alpha_A, alpha_B)
HFM_SELECTIONS = {
    "DISFA": (16, 0.1, 0.1),
    "BP4D": (10, 0.1, 0.1),
    "CK+": (10, 0.1, 0.1),
}

GRID_PRESETS = ("default", "extended")


def grid_preset(name: str):
    from .ffm import GridSpec

    if name == "default":
        return GridSpec()
    if name == "extended":
        return GridSpec(alphas=EXTENDED_ALPHAS, alphas_A=EXTENDED_ALPHAS, alphas_B=EXTENDED_ALPHAS)
    raise KeyError(f"unknown grid preset {name!r}; choose from {GRID_PRESETS}")


def published_grid(dataset: str):
    """Single-cell grid reproducing a dataset's published selections."""
    from .ffm import GridSpec

    pfm = PFM_SELECTIONS[dataset]
    q, a_A, a_B = HFM_SELECTIONS[dataset]
    k_values = {p: (sel[0],) for p, sel in pfm.items() if sel is not None}
    part_alphas = {p: (sel[1],) for p, sel in pfm.items() if sel is not None}
    skip = tuple(p for p, sel in pfm.items() if sel is None)
    return GridSpec(k_values=k_values, part_alphas=part_alphas, q_values=(q,),
                    alphas_A=(a_A,), alphas_B=(a_B,), skip_parts=skip)


# Published rater votes on the DISFA-trained AUs; True = non-interpretable.
_x = True
_o = False
DFECS_AU_VOTES = {
    f"component_{i + 1}": votes for i, votes in enumerate([
        (_o, _o, _o), (_o, _o, _o), (_o, _o, _o), (_o, _o, _o),
        (_o, _x, _o), (_x, _o, _x), (_o, _o, _o), (_o, _o, _o),
        (_x, _x, _x), (_o, _o, _o), (_o, _o, _o), (_o, _o, _x),
        (_o, _o, _o), (_o, _o, _o), (_o, _o, _o), (_o, _o, _o),
    ])
}
PCA_AU_VOTES = {
    "component_1_pos": (_o, _o, _o), "component_2_pos": (_o, _o, _o),
    "component_3_pos": (_x, _o, _o), "component_4_pos": (_o, _o, _o),
    "component_5_pos": (_o, _o, _o), "component_6_pos": (_x, _o, _x),
    "component_7_pos": (_x, _x, _x), "component_8_pos": (_x, _x, _x),
    "component_1_neg": (_o, _o, _o), "component_2_neg": (_x, _x, _x),
    "component_3_neg": (_o, _o, _o), "component_4_neg": (_o, _o, _o),
    "component_5_neg": (_x, _o, _x), "component_6_neg": (_x, _o, _x),
    "component_7_neg": (_o, _x, _o), "component_8_neg": (_o, _o, _x),
}
del _x, _o
