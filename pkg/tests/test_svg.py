import re

import numpy as np
import pytest

from dfecs.kpm import N_ROWS
from dfecs.svg import MOVED_COLOR, NEUTRAL_COLOR, auto_scale, curves_svg, export_au_svg
from dfecs.synthetic import face_template


def count(svg, cls):
    return len(re.findall(f'class="{cls}"', svg))


def test_zero_au_draws_no_arrows(face):
    svg = export_au_svg(np.zeros(N_ROWS), face)
    assert count(svg, "arrow") == 0
    assert count(svg, "neutral") == 68 and count(svg, "moved") == 68


def test_single_keypoint_single_arrow(face):
    au = np.zeros(N_ROWS)
    au[2 * 48] = 1.0
    svg = export_au_svg(au, face, 5.0)
    assert count(svg, "arrow") == 1
    assert NEUTRAL_COLOR in svg and MOVED_COLOR in svg


def test_threshold_and_validity(face):
    au = np.full(N_ROWS, 1e-3)
    assert count(export_au_svg(au, face, threshold=1e-2), "arrow") == 0
    valid = np.ones(68, bool)
    valid[:17] = False
    svg = export_au_svg(au, face, validity=valid, threshold=0)
    assert count(svg, "arrow") == 51 and count(svg, "neutral") == 51


def test_deterministic_and_escaped(face, rng):
    au = rng.normal(size=N_ROWS)
    a = export_au_svg(au, face, 2.0, title="<AU & 1>")
    assert a == export_au_svg(au, face, 2.0, title="<AU & 1>")
    assert "&lt;AU &amp; 1&gt;" in a


def test_bad_length(face):
    with pytest.raises(ValueError):
        export_au_svg(np.zeros(135), face)


def test_auto_scale():
    face = face_template()
    U = np.zeros((N_ROWS, 2))
    U[0, 0] = 2.0
    width = np.ptp(face[:, 0])
    assert auto_scale(U, face) == pytest.approx(0.15 * width / 2.0)
    assert auto_scale(np.zeros((N_ROWS, 1)), face) == 1.0


def test_curves_svg():
    svg = curves_svg([("a", [0, 1, 2], [0, 50, 120]), ("b", [1, 10, 100], [10, 20, 30])],
                     xlabel="k", log_x=True, title="t")
    assert svg.count("<polyline") == 2 and svg.startswith("<svg")
    assert svg == curves_svg([("a", [0, 1, 2], [0, 50, 120]), ("b", [1, 10, 100], [10, 20, 30])],
                             xlabel="k", log_x=True, title="t")
