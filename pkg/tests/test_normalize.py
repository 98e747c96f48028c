import math
import shlex
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from svgforge.model import Arc, Close, Cubic, Line, Move
from svgforge.normalize import (
    NormalizeConfig,
    Normalized,
    RejectError,
    Rejected,
    RejectReason,
    absolutize,
    canonical_document,
    filter_sample,
    flatten_tree,
    normalize_pipeline,
    quantize,
    rescale_viewbox,
    restrict_vocabulary,
    serialize_canonical,
    shapes_to_paths,
    token_proxy,
)
from svgforge.parse import RawCommand, Rgb, parse_document, parse_path_data

RED = Rgb(255, 0, 0)
BLUE = Rgb(0, 0, 255)

SVG = '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 100 100">%s</svg>'


def doc_of(body, viewbox="0 0 100 100"):
    return parse_document(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{viewbox}">{body}</svg>'
    )


def path_letters(doc):
    return ["".join(c.letter for c in p.commands) for p in doc.paths]


# ---------------------------------------------------------------------------
# shapes to paths


class TestShapeConversion:
    def test_plain_rect(self):
        doc = shapes_to_paths(doc_of('<rect x="1" y="2" width="10" height="20"/>'))
        (el,) = doc.elements
        assert [c.letter for c in el.commands] == ["M", "L", "L", "L", "Z"]
        assert el.commands[0].args == (1, 2)
        assert el.commands[2].args == (11, 22)

    def test_rect_defaults_origin(self):
        doc = shapes_to_paths(doc_of('<rect width="5" height="5"/>'))
        assert doc.elements[0].commands[0].args == (0, 0)

    def test_rounded_rect_uses_arcs(self):
        doc = shapes_to_paths(
            doc_of('<rect x="0" y="0" width="40" height="20" rx="5"/>')
        )
        (el,) = doc.elements
        letters = [c.letter for c in el.commands]
        assert letters == ["M", "L", "A", "L", "A", "L", "A", "L", "A", "Z"]
        # one radius given: the other copies it
        assert el.commands[2].args[:2] == (5, 5)
        assert el.commands[0].args == (5, 0)

    def test_rect_radius_clamped_to_half(self):
        doc = shapes_to_paths(
            doc_of('<rect width="10" height="10" rx="40" ry="2"/>')
        )
        assert doc.elements[0].commands[2].args[:2] == (5, 2)

    def test_negative_rect_poisons(self):
        with pytest.raises(RejectError) as err:
            shapes_to_paths(doc_of('<rect width="-5" height="5"/>'))
        assert err.value.reason.kind == "non-renderable"

    def test_zero_rect_dropped_with_warning(self):
        doc = shapes_to_paths(doc_of('<rect width="0" height="5"/>'))
        assert doc.elements == []
        assert any("zero-size" in w for w in doc.warnings)

    def test_circle_two_half_turns(self):
        doc = shapes_to_paths(doc_of('<circle cx="50" cy="40" r="10"/>'))
        (el,) = doc.elements
        assert [c.letter for c in el.commands] == ["M", "A", "A", "Z"]
        assert el.commands[0].args == (60, 40)
        assert el.commands[1].args == (10, 10, 0, 1, 1, 40, 40)
        assert el.commands[2].args == (10, 10, 0, 1, 1, 60, 40)

    def test_ellipse(self):
        doc = shapes_to_paths(doc_of('<ellipse cx="0" cy="0" rx="8" ry="4"/>'))
        assert doc.elements[0].commands[1].args[:2] == (8, 4)

    def test_zero_radius_dropped(self):
        doc = shapes_to_paths(doc_of('<circle cx="1" cy="1" r="0"/>'))
        assert doc.elements == []

    def test_line_dropped_and_counted(self):
        doc = shapes_to_paths(doc_of('<line x1="0" y1="0" x2="9" y2="9"/>'))
        assert doc.elements == []
        assert doc.dropped_invisible == 1

    def test_polygon_closes_polyline_does_not(self):
        doc = shapes_to_paths(doc_of('<polygon points="0 0 4 0 2 3"/>'))
        assert [c.letter for c in doc.elements[0].commands] == ["M", "L", "L", "Z"]
        doc = shapes_to_paths(doc_of('<polyline points="0 0 4 0 2 3"/>'))
        assert [c.letter for c in doc.elements[0].commands] == ["M", "L", "L"]

    def test_shapes_inside_groups_converted(self):
        doc = shapes_to_paths(
            doc_of('<g transform="scale(2)"><rect width="3" height="3"/></g>')
        )
        (group,) = doc.elements
        assert [c.letter for c in group.children[0].commands][0] == "M"


# ---------------------------------------------------------------------------
# flattening


class TestFlatten:
    def test_transform_baked_into_coordinates(self):
        doc = shapes_to_paths(
            doc_of('<g transform="translate(10 20)"><rect width="4" height="4" fill="#FF0000"/></g>')
        )
        flat = flatten_tree(doc)
        (fill, commands) = flat[0]
        assert fill == RED
        assert commands[0].args == (10, 20)
        assert commands[2].args == (14, 24)

    def test_fill_inheritance_and_default_black(self):
        doc = shapes_to_paths(doc_of(
            '<g fill="#FF0000"><rect width="2" height="2"/>'
            '<rect width="2" height="2" fill="#0000FF"/></g>'
            '<rect width="2" height="2"/>'
        ))
        flat = flatten_tree(doc)
        assert [fill for fill, _ in flat] == [RED, BLUE, Rgb(0, 0, 0)]

    def test_none_fill_dropped(self):
        doc = shapes_to_paths(doc_of(
            '<rect width="2" height="2" fill="none"/>'
            '<rect width="2" height="2" fill="#FF0000"/>'
        ))
        flat = flatten_tree(doc)
        assert len(flat) == 1

    def test_everything_invisible_rejects(self):
        doc = shapes_to_paths(doc_of('<rect width="2" height="2" fill="none"/>'))
        with pytest.raises(RejectError) as err:
            flatten_tree(doc)
        assert err.value.reason.kind == "unsupported-element"

    def test_unsupported_paint_rejects(self):
        doc = shapes_to_paths(doc_of('<rect width="2" height="2" fill="url(#g)"/>'))
        with pytest.raises(RejectError) as err:
            flatten_tree(doc)
        assert err.value.reason.kind == "unsupported-paint"

    def test_unsupported_element_rejects(self):
        doc = shapes_to_paths(doc_of('<text x="0" y="0">hi</text>'))
        with pytest.raises(RejectError) as err:
            flatten_tree(doc)
        assert err.value.reason.kind == "unsupported-element"

    def test_arc_survives_uniform_scale(self):
        doc = shapes_to_paths(
            doc_of('<g transform="scale(2)"><circle cx="10" cy="10" r="5" fill="#FF0000"/></g>')
        )
        (_, commands) = flatten_tree(doc)[0]
        arcs = [c for c in commands if c.letter == "A"]
        assert len(arcs) == 2
        assert arcs[0].args[:2] == (10, 10)
        assert arcs[0].args[5:] == (10, 20)

    def test_arc_survives_axis_aligned_scale(self):
        doc = shapes_to_paths(
            doc_of('<g transform="scale(2 3)"><circle cx="0" cy="0" r="5" fill="#FF0000"/></g>')
        )
        (_, commands) = flatten_tree(doc)[0]
        arcs = [c for c in commands if c.letter == "A"]
        assert arcs[0].args[:2] == (10, 15)

    def test_arc_under_rotation_becomes_cubics(self):
        doc = shapes_to_paths(
            doc_of('<g transform="rotate(30)"><circle cx="40" cy="40" r="5" fill="#FF0000"/></g>')
        )
        (_, commands) = flatten_tree(doc)[0]
        letters = {c.letter for c in commands}
        assert "A" not in letters
        assert "C" in letters

    def test_arc_under_skew_becomes_cubics(self):
        doc = shapes_to_paths(
            doc_of('<g transform="skewX(20)"><circle cx="40" cy="40" r="5" fill="#FF0000"/></g>')
        )
        (_, commands) = flatten_tree(doc)[0]
        assert "A" not in {c.letter for c in commands}

    def test_rotated_arc_geometry_matches(self):
        # sample the converted cubics; every point must sit on the rotated circle
        doc = shapes_to_paths(
            doc_of('<g transform="rotate(30 40 40)"><circle cx="40" cy="40" r="10" fill="#FF0000"/></g>')
        )
        (_, commands) = flatten_tree(doc)[0]
        for cmd in commands:
            if cmd.letter == "C":
                ex, ey = cmd.args[4], cmd.args[5]
                r = math.hypot(ex - 40, ey - 40)
                assert abs(r - 10) < 1e-9


# ---------------------------------------------------------------------------
# absolutize


class TestAbsolutize:
    def test_relative_run(self):
        cmds = absolutize(parse_path_data("m 10 10 l 5 0 l 0 5 z"))
        assert [(c.letter, c.args) for c in cmds] == [
            ("M", (10, 10)), ("L", (15, 10)), ("L", (15, 15)), ("Z", ())
        ]

    def test_shorthand_letters_survive(self):
        cmds = absolutize(parse_path_data("M 1 2 h 3 v 4 H 10 V 20"))
        assert [(c.letter, c.args) for c in cmds] == [
            ("M", (1, 2)), ("H", (4,)), ("V", (6,)), ("H", (10,)), ("V", (20,))
        ]

    def test_close_resets_current_point(self):
        cmds = absolutize(parse_path_data("M 10 10 l 5 5 Z l 1 1"))
        assert cmds[3].args == (11, 11)

    def test_moveto_after_close_relative(self):
        cmds = absolutize(parse_path_data("M 10 10 L 20 20 Z m 5 5"))
        # relative moveto offsets from the subpath start restored by Z
        assert cmds[3].args == (15, 15)

    def test_relative_curves(self):
        cmds = absolutize(parse_path_data("M 10 20 c 1 2 3 4 5 6 q 1 1 2 2 t 1 1 a 5 5 0 0 1 3 3 s 1 1 2 2"))
        assert cmds[1].args == (11, 22, 13, 24, 15, 26)
        assert cmds[2].args == (16, 27, 17, 28)
        assert cmds[3].args == (18, 29)
        assert cmds[4].args == (5, 5, 0, 0, 1, 21, 32)
        assert cmds[5].args == (22, 33, 23, 34)

    def test_must_start_with_moveto(self):
        with pytest.raises(RejectError):
            absolutize(parse_path_data("L 1 1"))


# ---------------------------------------------------------------------------
# vocabulary restriction


def cubic_point(c, x0, y0, t):
    mt = 1 - t
    x = mt**3 * x0 + 3 * mt**2 * t * c.x1 + 3 * mt * t**2 * c.x2 + t**3 * c.x
    y = mt**3 * y0 + 3 * mt**2 * t * c.y1 + 3 * mt * t**2 * c.y2 + t**3 * c.y
    return x, y


def quad_point(x0, y0, qx, qy, x1, y1, t):
    mt = 1 - t
    return (
        mt**2 * x0 + 2 * mt * t * qx + t**2 * x1,
        mt**2 * y0 + 2 * mt * t * qy + t**2 * y1,
    )


class TestRestrictVocabulary:
    def test_h_v_become_lines(self):
        cmds = restrict_vocabulary(absolutize(parse_path_data("M 1 2 H 10 V 20")))
        assert cmds[1] == Line(10, 2)
        assert cmds[2] == Line(10, 20)

    def test_quadratic_elevation_exact(self):
        cmds = restrict_vocabulary(absolutize(parse_path_data("M 0 0 Q 30 60 60 0")))
        c = cmds[1]
        assert isinstance(c, Cubic)
        assert (c.x1, c.y1) == (20, 40)
        assert (c.x2, c.y2) == (40, 40)
        for t in (0.1, 0.35, 0.5, 0.77):
            qx, qy = quad_point(0, 0, 30, 60, 60, 0, t)
            bx, by = cubic_point(c, 0, 0, t)
            assert math.isclose(qx, bx, abs_tol=1e-12)
            assert math.isclose(qy, by, abs_tol=1e-12)

    def test_smooth_cubic_reflects_after_cubic(self):
        cmds = restrict_vocabulary(absolutize(
            parse_path_data("M 0 0 C 10 20 30 40 50 0 S 90 -40 100 0")
        ))
        s = cmds[2]
        assert (s.x1, s.y1) == (70, -40)  # 2*(50,0) - (30,40)

    def test_smooth_cubic_without_previous_cubic(self):
        cmds = restrict_vocabulary(absolutize(parse_path_data("M 5 5 S 20 30 40 5")))
        s = cmds[1]
        assert (s.x1, s.y1) == (5, 5)

    def test_smooth_quad_chain(self):
        cmds = restrict_vocabulary(absolutize(
            parse_path_data("M 0 0 Q 10 20 20 0 T 40 0 T 60 0")
        ))
        # first T reflects (10,20) about (20,0) -> (30,-20)
        # second T reflects (30,-20) about (40,0) -> (50,20)
        t1, t2 = cmds[2], cmds[3]
        assert math.isclose(t1.x1, 20 + 2 * (30 - 20) / 3)
        assert math.isclose(t1.y1, 0 + 2 * (-20 - 0) / 3)
        assert math.isclose(t2.x1, 40 + 2 * (50 - 40) / 3)
        assert math.isclose(t2.y1, 0 + 2 * (20 - 0) / 3)

    def test_smooth_quad_without_previous_quad(self):
        cmds = restrict_vocabulary(absolutize(parse_path_data("M 10 10 T 30 10")))
        t = cmds[1]
        # degenerate control point at the current point: straight segment
        assert (t.x1, t.y1) == (10, 10)

    def test_arc_radii_made_positive(self):
        cmds = restrict_vocabulary(absolutize(parse_path_data("M 0 0 A -5 -6 0 1 0 10 0")))
        a = cmds[1]
        assert isinstance(a, Arc)
        assert (a.rx, a.ry) == (5, 6)
        assert (a.large_arc, a.sweep) == (1, 0)

    def test_only_canonical_kinds_emitted(self):
        d = "M 0 0 h 5 v 5 q 1 1 2 2 t 3 0 c 1 1 2 2 3 3 s 1 1 2 2 a 4 4 0 0 1 4 4 z"
        cmds = restrict_vocabulary(absolutize(parse_path_data(d)))
        assert {type(c) for c in cmds} <= {Move, Line, Cubic, Arc, Close}


# ---------------------------------------------------------------------------
# rescale + quantize


class TestRescale:
    def test_square_100(self):
        out = rescale_viewbox([(RED, [Move(50, 50)])], (0, 0, 100, 100))
        assert out[0][1][0] == Move(100, 100)

    def test_square_128(self):
        out = rescale_viewbox([(RED, [Move(64, 64)])], (0, 0, 128, 128))
        assert out[0][1][0] == Move(100, 100)

    def test_portrait_centered(self):
        out = rescale_viewbox([(RED, [Move(0, 0)])], (0, 0, 100, 200))
        assert out[0][1][0] == Move(50, 0)

    def test_offset_viewbox(self):
        out = rescale_viewbox([(RED, [Move(10, 20)])], (10, 20, 50, 50))
        assert out[0][1][0] == Move(0, 0)

    def test_arc_radii_scaled(self):
        out = rescale_viewbox([(RED, [Arc(5, 5, 0, 1, 1, 50, 50)])], (0, 0, 100, 100))
        a = out[0][1][0]
        assert (a.rx, a.ry) == (10, 10)
        assert (a.x, a.y) == (100, 100)


class TestQuantize:
    def test_half_away_from_zero(self):
        out = quantize([(RED, [Move(0.5, 1.5), Line(-0.5, -1.5), Line(2.4, -2.6)])])
        cmds = out[0][1]
        assert cmds[0] == Move(1, 2)
        assert cmds[1] == Line(-1, -2)
        assert cmds[2] == Line(2, -3)

    def test_zero_radius_arc_degrades_to_line(self):
        out = quantize([(RED, [Arc(0.3, 5, 0, 1, 1, 10.6, 10.4)])])
        assert out[0][1][0] == Line(11, 10)

    def test_arc_rotation_rounded(self):
        out = quantize([(RED, [Arc(5.4, 5.6, 29.5, 0, 1, 3, 3)])])
        assert out[0][1][0] == Arc(5, 6, 30, 0, 1, 3, 3)

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    def test_rounding_error_bounded(self, x):
        out = quantize([(RED, [Move(x, 0)])])
        assert abs(out[0][1][0].x - x) <= 0.5


# ---------------------------------------------------------------------------
# serialization + filtering


def two_color_doc():
    return canonical_document(SVG % (
        '<rect x="10" y="10" width="40" height="40" fill="#FF0000"/>'
        '<rect x="60" y="60" width="20" height="20" fill="#0000FF"/>'
    ))


class TestSerialize:
    def test_exact_bytes(self):
        text = serialize_canonical(two_color_doc())
        assert text == (
            '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 200 200">'
            '<path fill="#FF0000" d="M20 20 L100 20 L100 100 L20 100 Z" />'
            '<path fill="#0000FF" d="M120 120 L160 120 L160 160 L120 160 Z" />'
            "</svg>"
        )

    def test_no_trailing_newline(self):
        assert not serialize_canonical(two_color_doc()).endswith("\n")


class TestFilter:
    def test_keep(self):
        assert filter_sample(two_color_doc()) is None

    def test_empty(self):
        doc = canonical_document(SVG % '<rect width="5" height="5" fill="#FF0000"/>')
        empty = type(doc)(paths=[])
        reason = filter_sample(empty)
        assert reason.kind == "empty"

    def test_monochrome_reports_hex(self):
        doc = canonical_document(SVG % (
            '<rect width="5" height="5" fill="#FF0000"/>'
            '<rect x="20" y="20" width="5" height="5" fill="rgb(255,0,0)"/>'
        ))
        reason = filter_sample(doc)
        assert reason.kind == "monochrome"
        assert reason.detail == "#FF0000"

    def test_too_long(self):
        reason = filter_sample(two_color_doc(), NormalizeConfig(token_limit=10))
        assert reason.kind == "too-long"

    def test_non_renderable_after_quantize(self):
        # distinct fills but both shapes collapse off the painted canvas
        doc = canonical_document(SVG % (
            '<rect x="-900" y="-900" width="40" height="40" fill="#FF0000"/>'
            '<rect x="900" y="900" width="40" height="40" fill="#0000FF"/>'
        ))
        reason = filter_sample(doc)
        assert reason.kind == "non-renderable"


# ---------------------------------------------------------------------------
# pipeline


class TestPipeline:
    def test_keep_produces_stats(self):
        result = normalize_pipeline(SVG % (
            '<rect x="10" y="10" width="40" height="40" fill="#FF0000"/>'
            '<circle cx="70" cy="70" r="15" fill="#0000FF"/>'
        ))
        assert isinstance(result, Normalized)
        assert result.stats.paths == 2
        assert result.stats.colors == 2
        assert result.stats.command_histogram["A"] == 2
        assert result.stats.token_estimate == math.ceil(
            len(result.text.encode()) / 3
        )

    def test_idempotent_on_canonical_output(self):
        first = normalize_pipeline(SVG % (
            '<rect x="10" y="10" width="40" height="40" fill="#FF0000"/>'
            '<circle cx="70" cy="70" r="15" fill="#0000FF"/>'
        ))
        second = normalize_pipeline(first.text)
        assert isinstance(second, Normalized)
        assert second.text == first.text

    def test_parse_failure_becomes_reject(self):
        result = normalize_pipeline("<svg viewBox='0 0 9 9'><rect")
        assert isinstance(result, Rejected)
        assert result.reason.kind == "non-renderable"
        assert "parse" in result.reason.detail

    def test_monochrome_rejected(self):
        result = normalize_pipeline(SVG % '<rect width="50" height="50" fill="#FF0000"/>')
        assert isinstance(result, Rejected)
        assert result.reason.kind == "monochrome"

    def test_unsupported_paint_rejected(self):
        result = normalize_pipeline(SVG % (
            '<rect width="5" height="5" fill="url(#x)"/>'
            '<rect x="20" y="20" width="5" height="5" fill="#FF0000"/>'
        ))
        assert isinstance(result, Rejected)
        assert result.reason.kind == "unsupported-paint"

    def test_empty_document_rejected(self):
        result = normalize_pipeline('<svg viewBox="0 0 10 10"></svg>')
        assert isinstance(result, Rejected)
        assert result.reason.kind == "empty"


# ---------------------------------------------------------------------------
# token proxy


class TestTokenProxy:
    def test_byte_heuristic(self):
        assert token_proxy("abcdef", 3) == 2
        assert token_proxy("abcdefg", 3) == 3
        assert token_proxy("", 3) == 0

    def test_unicode_counts_bytes(self):
        assert token_proxy("é", 2) == 1  # two bytes, divisor two

    def test_external_command(self):
        cmd = f"{shlex.quote(sys.executable)} -c " + shlex.quote(
            "import sys; print(len(sys.stdin.read()) * 10)"
        )
        assert token_proxy("abc", 3, cmd) == 30

    def test_external_failure_falls_back(self):
        cmd = f"{shlex.quote(sys.executable)} -c " + shlex.quote("raise SystemExit(3)")
        assert token_proxy("abcdef", 3, cmd) == 2
