"""Trace-acceptance kernel.

Acceptance checking is the inner loop of state-merging inference (every
candidate merge re-checks the whole training corpus), so it is implemented
twice: a compiled Cython extension (:mod:`._accel`) and a pure-Python
fallback (:mod:`._pure`) with identical semantics. The compiled kernel is
selected at import time when present; set ``TACINFER_KERNEL=python`` (or
call :func:`set_kernel`) to force the fallback, e.g. for benchmarking.

A machine is flattened once into interned integer arrays (CSR-style edge
lists plus sorted per-edge parameter sets); traces are encoded against the
intern tables and checked by exhaustive worklist exploration of
(state, position) pairs. For repeated whole-corpus checks the corpus can be
interned and encoded once, then shared across candidate machines.
"""
from __future__ import annotations

import os
from array import array
from dataclasses import dataclass
from typing import Sequence

from . import _pure

try:
    from . import _accel  # compiled extension, optional
except ImportError:  # pragma: no cover - depends on build environment
    _accel = None


@dataclass(frozen=True)
class CompiledMachine:
    """Flattened machine tables shared by both kernel implementations."""

    num_states: int
    initial: int
    finals: bytes
    estart: array  # CSR offsets per state into the edge arrays, len n+1
    elabel: array
    eto: array
    eopen: bytes
    pstart: array  # CSR offsets per edge into pids, len n_edges+1
    pids: array  # sorted interned param ids per edge
    label_ids: dict
    param_ids: dict


def compile_machine(
    num_states: int,
    initial: int,
    finals: Sequence[int],
    edges: Sequence[tuple[int, str, tuple[str, ...], bool, int]],
    label_ids: dict | None = None,
    param_ids: dict | None = None,
) -> CompiledMachine:
    """Intern labels/params and lay the machine out as flat arrays.

    ``edges`` rows are (src, label, allowed_params, open, dst). When base
    intern tables are given (e.g. built from a training corpus), machine
    strings extend them, so traces encoded against the base tables stay
    valid for this machine.
    """
    label_ids = dict(label_ids) if label_ids else {}
    param_ids = dict(param_ids) if param_ids else {}
    for _, label, allowed, _, _ in edges:
        if label not in label_ids:
            label_ids[label] = len(label_ids)
        for p in allowed:
            if p not in param_ids:
                param_ids[p] = len(param_ids)

    by_src = sorted(edges, key=lambda e: e[0])
    finals_mask = bytearray(num_states)
    for f in finals:
        finals_mask[f] = 1

    estart = array("i", [0] * (num_states + 1))
    elabel = array("i", [0] * len(by_src))
    eto = array("i", [0] * len(by_src))
    eopen = bytearray(len(by_src))
    pstart = array("i", [0] * (len(by_src) + 1))
    pids_list: list[int] = []
    for i, (src, label, allowed, is_open, dst) in enumerate(by_src):
        estart[src + 1] += 1
        elabel[i] = label_ids[label]
        eto[i] = dst
        eopen[i] = 1 if is_open else 0
        pids_list.extend(sorted(param_ids[p] for p in allowed))
        pstart[i + 1] = len(pids_list)
    for s in range(num_states):
        estart[s + 1] += estart[s]

    return CompiledMachine(
        num_states=num_states,
        initial=initial,
        finals=bytes(finals_mask),
        estart=estart,
        elabel=elabel,
        eto=eto,
        eopen=bytes(eopen),
        pstart=pstart,
        pids=array("i", pids_list),
        label_ids=label_ids,
        param_ids=param_ids,
    )


def intern_corpus(pairs_list: Sequence[Sequence[tuple[str, str]]]) -> tuple[dict, dict]:
    """Base intern tables covering every (label, params) pair in a corpus."""
    label_ids: dict = {}
    param_ids: dict = {}
    for pairs in pairs_list:
        for label, params in pairs:
            if label not in label_ids:
                label_ids[label] = len(label_ids)
            if params not in param_ids:
                param_ids[params] = len(param_ids)
    return label_ids, param_ids


def encode_trace(
    cm: CompiledMachine, pairs: Sequence[tuple[str, str]]
) -> tuple[array, array]:
    """Map a (label, params) sequence through the machine's intern tables.

    Unknown strings become -1: an unknown label can never match an edge, an
    unknown param is admitted only by open guards.
    """
    tlabels = array("i", (cm.label_ids.get(l, -1) for l, _ in pairs))
    tparams = array("i", (cm.param_ids.get(p, -1) for _, p in pairs))
    return tlabels, tparams


def encode_corpus(
    label_ids: dict,
    param_ids: dict,
    pairs_list: Sequence[Sequence[tuple[str, str]]],
) -> tuple[array, array, array]:
    """Flatten a corpus into (labels, params, offsets) arrays against the
    given intern tables."""
    tlabels = array("i")
    tparams = array("i")
    toffsets = array("i", [0])
    for pairs in pairs_list:
        tlabels.extend(label_ids.get(l, -1) for l, _ in pairs)
        tparams.extend(param_ids.get(p, -1) for _, p in pairs)
        toffsets.append(len(tlabels))
    return tlabels, tparams, toffsets


_VALID_KERNELS = ("auto", "python", "cython")
_impl = _pure


def set_kernel(name: str) -> str:
    """Select the kernel implementation: "auto", "python", or "cython".

    Returns the name of the implementation now active. Requesting "cython"
    when the extension is not built raises RuntimeError.
    """
    global _impl
    if name not in _VALID_KERNELS:
        raise ValueError(f"unknown kernel {name!r}, expected one of {_VALID_KERNELS}")
    if name == "python":
        _impl = _pure
    elif name == "cython":
        if _accel is None:
            raise RuntimeError("compiled kernel is not available (extension not built)")
        _impl = _accel
    else:
        _impl = _accel if _accel is not None else _pure
    return active_kernel()


def active_kernel() -> str:
    return "cython" if _impl is _accel else "python"


def have_compiled_kernel() -> bool:
    return _accel is not None


def accepts(cm: CompiledMachine, pairs: Sequence[tuple[str, str]]) -> bool:
    """Exhaustive acceptance check of one (label, params) sequence."""
    tlabels, tparams = encode_trace(cm, pairs)
    return _impl.accepts_encoded(cm, tlabels, tparams)


def accepts_all(
    cm: CompiledMachine, pairs_list: Sequence[Sequence[tuple[str, str]]]
) -> bool:
    """Batched whole-corpus acceptance check (early exit on first reject)."""
    flat = encode_corpus(cm.label_ids, cm.param_ids, pairs_list)
    return _impl.accepts_all_encoded(cm, *flat)


def accepts_all_encoded(cm: CompiledMachine, tlabels, tparams, toffsets) -> bool:
    return _impl.accepts_all_encoded(cm, tlabels, tparams, toffsets)


set_kernel(os.environ.get("TACINFER_KERNEL", "auto").strip().lower() or "auto")
