# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled acceptance kernel; mirrors _pure exactly.

The batched entry point checks a whole encoded corpus against one machine
with a single buffer acquisition and reused scratch space - the shape of the
call the inference inner loop makes for every candidate merge.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc
from libc.string cimport memset


cdef bint _run(int num_states, int initial,
               const unsigned char[:] finals,
               const int[:] estart, const int[:] elabel, const int[:] eto,
               const unsigned char[:] eopen,
               const int[:] pstart, const int[:] pids,
               const int[:] tl, const int[:] tp,
               Py_ssize_t lo, Py_ssize_t hi,
               unsigned char* visited, int* stack) noexcept nogil:
    cdef int length = <int> (hi - lo)
    if length == 0:
        return finals[initial] != 0
    cdef int width = length + 1
    memset(visited, 0, <size_t> num_states * width)
    cdef int top = 0
    cdef int code, state, pos, lbl, par, e, left, right, mid, child
    stack[top] = initial * width
    visited[stack[top]] = 1
    top += 1
    while top > 0:
        top -= 1
        code = stack[top]
        state = code // width
        pos = code - state * width
        if pos == length:
            if finals[state]:
                return True
            continue
        lbl = tl[lo + pos]
        if lbl < 0:
            continue
        par = tp[lo + pos]
        for e in range(estart[state], estart[state + 1]):
            if elabel[e] != lbl:
                continue
            if not eopen[e]:
                left = pstart[e]
                right = pstart[e + 1]
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
                stack[top] = child
                top += 1
    return False


cdef class _Scratch:
    cdef unsigned char* visited
    cdef int* stack
    cdef Py_ssize_t capacity

    def __cinit__(self, Py_ssize_t capacity):
        if capacity < 1:
            capacity = 1
        self.visited = <unsigned char*> PyMem_Malloc(capacity)
        self.stack = <int*> PyMem_Malloc(capacity * sizeof(int))
        if self.visited == NULL or self.stack == NULL:
            raise MemoryError()
        self.capacity = capacity

    def __dealloc__(self):
        PyMem_Free(self.visited)
        PyMem_Free(self.stack)


def accepts_encoded(cm, tlabels, tparams):
    cdef const int[:] estart = cm.estart
    cdef const int[:] elabel = cm.elabel
    cdef const int[:] eto = cm.eto
    cdef const unsigned char[:] eopen = cm.eopen
    cdef const int[:] pstart = cm.pstart
    cdef const int[:] pids = cm.pids
    cdef const unsigned char[:] finals = cm.finals
    cdef int num_states = cm.num_states
    cdef int initial = cm.initial
    cdef Py_ssize_t length = len(tlabels)
    if length == 0:
        return finals[initial] != 0
    cdef const int[:] tl = tlabels
    cdef const int[:] tp = tparams
    scratch = _Scratch(<Py_ssize_t> num_states * (length + 1))
    return _run(
        num_states, initial, finals, estart, elabel, eto, eopen, pstart, pids,
        tl, tp, 0, length, scratch.visited, scratch.stack,
    )


def accepts_all_encoded(cm, tlabels, tparams, toffsets):
    cdef const int[:] estart = cm.estart
    cdef const int[:] elabel = cm.elabel
    cdef const int[:] eto = cm.eto
    cdef const unsigned char[:] eopen = cm.eopen
    cdef const int[:] pstart = cm.pstart
    cdef const int[:] pids = cm.pids
    cdef const unsigned char[:] finals = cm.finals
    cdef int num_states = cm.num_states
    cdef int initial = cm.initial
    cdef const int[:] toff = toffsets
    cdef Py_ssize_t n_traces = len(toffsets) - 1
    if n_traces <= 0:
        return True
    cdef const int[:] tl
    cdef const int[:] tp
    if len(tlabels) > 0:
        tl = tlabels
        tp = tparams
    else:
        tl = toff  # placeholder buffer; empty traces never index it
        tp = toff
    cdef Py_ssize_t i, longest = 0
    for i in range(n_traces):
        if toff[i + 1] - toff[i] > longest:
            longest = toff[i + 1] - toff[i]
    scratch = _Scratch(<Py_ssize_t> num_states * (longest + 1))
    for i in range(n_traces):
        if not _run(
            num_states, initial, finals, estart, elabel, eto, eopen, pstart,
            pids, tl, tp, toff[i], toff[i + 1], scratch.visited, scratch.stack,
        ):
            return False
    return True
