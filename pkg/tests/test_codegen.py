import re

import pytest

from golden_cases import CASES, golden_path
from portten import ApplySpec, ConvGeometry, create, narrow
from portten.codegen import (UNROLL_LIMIT, CodegenError, OperandGeometry, ReduceGeometry,
                             gen_apply_kernel, gen_im2col_kernel, gen_reduce_kernel, set_dump_dir)
from portten.expr import ExpressionError


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name):
    assert CASES[name]().text == golden_path(name).read_text()


@pytest.mark.parametrize("name", sorted(CASES))
def test_entry_point_defined_once(name):
    src = CASES[name]()
    assert len(re.findall(rf"kernel void {src.entry_point}\(", src.text)) == 1
    assert "#pragma OPENCL FP_CONTRACT OFF" in src.text


def test_golden_suite_size():
    kinds = [n.split("_")[0] for n in CASES]
    assert kinds.count("apply") >= 4 and kinds.count("reduce") >= 3 and kinds.count("im2col") >= 5


def test_contiguous_apply_has_flat_path():
    text = gen_apply_kernel(ApplySpec("x = x * 2", 1), [create([1024])]).text
    assert "const int x_index = x_offset + linearId;" in text
    assert "rem" not in text
    assert "x_data[x_index] = (x * 2.0f);" in text


def test_strided_operand_decodes_per_dimension():
    y = narrow(create([4, 6]), 1, 1, 3)
    text = gen_apply_kernel(ApplySpec("x = x + y", 2), [create([4, 3]), y]).text
    # y: sizes (4, 3), strides (6, 1); offset arrives as y_offset at launch
    assert "int y_index = y_offset;" in text
    assert "y_index += (rem % 3) * 1;" in text
    assert "y_index += rem * 6;" in text
    assert "const int x_index = x_offset + linearId;" in text


def test_size_one_dims_do_not_break_contiguity():
    g = OperandGeometry((3, 1, 4), (4, 99, 1))
    assert g.contiguous
    assert "rem" not in gen_apply_kernel(ApplySpec("x = -x", 1), [g]).text


def test_apply_geometry_is_baked():
    a = gen_apply_kernel(ApplySpec("x = x * 2", 1), [create([10])]).text
    b = gen_apply_kernel(ApplySpec("x = x * 2", 1), [create([11])]).text
    assert "linearId >= 10" in a and "linearId >= 11" in b


def test_apply_rejects_undeclared_operand():
    with pytest.raises(ExpressionError, match="'q'"):
        gen_apply_kernel(ApplySpec("x = q + 1", 1), [create([4])])


def test_apply_rejects_bad_geometry():
    with pytest.raises(CodegenError):
        gen_apply_kernel(ApplySpec("x = x + y", 2), [create([4]), create([5])])
    with pytest.raises(CodegenError):
        gen_apply_kernel(ApplySpec("x = x", 1), [OperandGeometry((1,) * 9, (1,) * 9)])


@pytest.mark.parametrize("wg,steps", [(32, 5), (64, 6), (128, 7), (256, 8)])
def test_reduce_tree_unrolled(wg, steps):
    text = gen_reduce_kernel("sum", ReduceGeometry((5000,), (1,)), wg).text
    assert f"local float buf[{wg}];" in text
    assert len(re.findall(r"if \(lid < \d+\)", text)) == steps
    assert "for (int step" not in text


@pytest.mark.parametrize("op,wg", [("prod", 64), ("sum", 48), ("sum", 512)])
def test_reduce_rejects(op, wg):
    with pytest.raises(CodegenError):
        gen_reduce_kernel(op, ReduceGeometry((8,), (1,)), wg)


def test_reduce_index_only_along_dim():
    with pytest.raises(CodegenError):
        gen_reduce_kernel("max", ReduceGeometry((8,), (1,)), 32, with_index=True)


def test_im2col_1x1_has_no_guard():
    text = gen_im2col_kernel(ConvGeometry(1, 4, 8, 8, 4, 1, 1)).text
    assert "h >= 0" not in text and "0.0f" not in text


def test_im2col_padded_has_guard():
    text = gen_im2col_kernel(ConvGeometry(1, 3, 16, 16, 8, 3, 3, 1, 1)).text
    assert text.count("(h >= 0 && h < 16 && w >= 0 && w < 16)") == 9


@pytest.mark.parametrize("k,unrolled", [(1, True), (3, True), (5, True), (7, False), (11, False)])
def test_im2col_unroll_threshold(k, unrolled):
    text = gen_im2col_kernel(ConvGeometry(1, 1, 16, 16, 1, k, k)).text
    assert (k * k <= UNROLL_LIMIT) == unrolled
    assert ("for (int r = 0; r < %d; ++r)" % k in text) != unrolled
    if unrolled:
        assert text.count("col[") == k * k


def test_im2col_rejects_non_geometry():
    with pytest.raises(CodegenError):
        gen_im2col_kernel((1, 1, 4, 4))


def test_generation_is_deterministic():
    for make in CASES.values():
        assert make().text == make().text


def test_dump_dir(tmp_path):
    set_dump_dir(tmp_path)
    try:
        gen_apply_kernel(ApplySpec("x = x * 2", 1), [create([8])])
        gen_im2col_kernel(ConvGeometry(1, 1, 4, 4, 1, 3, 3))
    finally:
        set_dump_dir(None)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["0000_apply1.cl", "0001_im2col.cl"]
