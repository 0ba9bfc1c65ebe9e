"""Many-to-one Deferred-Acceptance in both proposing directions."""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from .core import UNMATCHED, Matching, ValidatedInstance


def student_proposing_da(inst: ValidatedInstance) -> Matching:
    """Applicant-optimal stable matching.

    Free applicants propose in ID order; each program keeps its tentatively
    admitted applicants in a min-heap on program utility so the worst one can be
    bumped in O(log C_j).
    """
    next_choice = inst.app_ptr[:-1].copy()
    end = inst.app_ptr[1:]
    held: list[list[tuple[float, int, int]]] = [[] for _ in range(inst.n_programs)]
    free = deque(range(inst.n_applicants))
    cap = inst.capacity
    while free:
        i = free.popleft()
        if next_choice[i] >= end[i]:
            continue
        k = int(next_choice[i])
        next_choice[i] += 1
        j = int(inst.pair_prog[k])
        if cap[j] == 0:
            free.appendleft(i)
            continue
        heap = held[j]
        entry = (float(inst.q[k]), i, k)
        if len(heap) < cap[j]:
            heapq.heappush(heap, entry)
        elif entry[0] > heap[0][0]:
            _, bumped, _ = heapq.heapreplace(heap, entry)
            free.appendleft(bumped)
        else:
            free.appendleft(i)

    m = Matching.empty(inst)
    for j, heap in enumerate(held):
        for _, i, _ in heap:
            m.assign(i, j)
    return m


def program_proposing_da(inst: ValidatedInstance) -> Matching:
    """Program-optimal stable matching.

    Programs with free seats offer to the next applicant on their priority list;
    an applicant keeps only the best offer received so far.
    """
    pointer = np.zeros(inst.n_programs, dtype=np.int64)
    held = np.zeros(inst.n_programs, dtype=np.int64)
    current = np.full(inst.n_applicants, UNMATCHED, dtype=np.int64)
    current_p = np.zeros(inst.n_applicants)
    queue = deque(j for j in range(inst.n_programs) if inst.capacity[j] > 0)
    while queue:
        j = queue.popleft()
        ks = inst.prog_pairs[j]
        while held[j] < inst.capacity[j] and pointer[j] < len(ks):
            k = int(ks[pointer[j]])
            pointer[j] += 1
            i = int(inst.pair_app[k])
            if current[i] == UNMATCHED or inst.p[k] > current_p[i]:
                prev = current[i]
                current[i], current_p[i] = j, inst.p[k]
                held[j] += 1
                if prev != UNMATCHED:
                    held[prev] -= 1
                    queue.append(int(prev))
    return Matching(inst.n_applicants, inst.n_programs, current)
