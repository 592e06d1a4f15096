"""Pure-Python acceptance kernel; the reference for the compiled version.

Worklist exploration over (state, position) pairs packed as
``state * (len + 1) + position`` with a bytearray visited set; per-edge
parameter membership is a binary search over the edge's sorted id slice.
"""
from __future__ import annotations


def _run(cm, tlabels, tparams, lo: int, hi: int) -> bool:
    length = hi - lo
    if length == 0:
        return bool(cm.finals[cm.initial])
    width = length + 1
    estart, elabel, eto, eopen = cm.estart, cm.elabel, cm.eto, cm.eopen
    pstart, pids, finals = cm.pstart, cm.pids, cm.finals
    visited = bytearray(cm.num_states * width)
    stack = [cm.initial * width]
    visited[stack[0]] = 1
    while stack:
        code = stack.pop()
        state, pos = divmod(code, width)
        if pos == length:
            if finals[state]:
                return True
            continue
        lbl = tlabels[lo + pos]
        if lbl < 0:
            continue
        par = tparams[lo + pos]
        for e in range(estart[state], estart[state + 1]):
            if elabel[e] != lbl:
                continue
            if not eopen[e]:
                left, right = pstart[e], pstart[e + 1]
                while left < right:
                    mid = (left + right) // 2
                    if pids[mid] < par:
                        left = mid + 1
                    else:
                        right = mid
                if left >= pstart[e + 1] or pids[left] != par:
                    continue
            child = eto[e] * width + pos + 1
            if not visited[child]:
                visited[child] = 1
                stack.append(child)
    return False


def accepts_encoded(cm, tlabels, tparams) -> bool:
    return _run(cm, tlabels, tparams, 0, len(tlabels))


def accepts_all_encoded(cm, tlabels, tparams, toffsets) -> bool:
    for i in range(len(toffsets) - 1):
        if not _run(cm, tlabels, tparams, toffsets[i], toffsets[i + 1]):
            return False
    return True
