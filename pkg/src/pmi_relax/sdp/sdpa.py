"""SDPA sparse format (``.dat-s``) export and import.

The problem is written as the SDPA *dual* form

    maximize <F0, Y>  subject to  <F_c, Y> = c_c,  Y PSD,

with ``Y = X``, ``F_c = A_c``, ``c_c = b_c`` and ``F0 = -C``.  Free variables
are split as ``r = r+ - r-`` into one trailing diagonal block; the sidecar
``<path>.meta.json`` records this so the reader can fold them back.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .problem import SdpBlock, SdpProblem

ZERO = 0.0


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def export_sdpa(sdp: SdpProblem, path: str | Path) -> Path:
    path = Path(path)
    N = sdp.n_constraints
    nf = sdp.n_free
    sizes = [str(blk.size) for blk in sdp.blocks]
    if nf:
        sizes.append(str(-2 * nf))
    lines = [
        f"{N} = mDIM",
        f"{len(sizes)} = nBLOCK",
        " ".join(sizes),
        " ".join(repr(float(v)) for v in sdp.b),
    ]

    def emit(mat_no: int, blk_no: int, M: np.ndarray) -> None:
        iu, ju = np.triu_indices(M.shape[0])
        vals = M[iu, ju]
        for i, j, v in zip(iu, ju, vals):
            if v != ZERO:
                lines.append(f"{mat_no} {blk_no} {i + 1} {j + 1} {float(v)!r}")

    free_blk = len(sdp.blocks) + 1
    for k, blk in enumerate(sdp.blocks, start=1):
        emit(0, k, -blk.objective_matrix())
    if nf:
        emit(0, free_blk, np.diag(np.concatenate([-sdp.c_free, sdp.c_free])))
    for c in range(N):
        for k, blk in enumerate(sdp.blocks, start=1):
            emit(c + 1, k, blk.A[c])
        if nf:
            emit(c + 1, free_blk, np.diag(np.concatenate([sdp.B[c], -sdp.B[c]])))
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "format": "sdpa-sparse",
        "sense": "F0 = -C; maximizing <F0, Y> minimizes the original objective",
        "labels": [blk.label for blk in sdp.blocks],
        "free": None if not nf else {
            "block": free_blk,
            "names": list(sdp.free_names),
            "layout": "first half r+, second half r-",
        },
        "extra": sdp.meta,
    }
    _meta_path(path).write_text(json.dumps(meta, indent=1, default=str))
    return path


def _tokens(text: str):
    for raw in text.splitlines():
        line = raw.split("*")[0].split('"')[0].strip()
        if line:
            yield line


def _numbers(line: str) -> list[str]:
    return line.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split()


def read_sdpa(path: str | Path) -> SdpProblem:
    path = Path(path)
    lines = list(_tokens(path.read_text()))
    if len(lines) < 4:
        raise ValueError(f"{path}: truncated SDPA header")
    N = int(_numbers(lines[0])[0])
    nblock = int(_numbers(lines[1])[0])
    sizes = [int(s) for s in _numbers(lines[2])[:nblock]]
    b = np.array([float(v) for v in _numbers(lines[3])[:N]])
    if len(sizes) != nblock or b.shape[0] != N:
        raise ValueError(f"{path}: malformed header")
    F = [np.zeros((N + 1, abs(s), abs(s))) for s in sizes]
    for ln in lines[4:]:
        parts = _numbers(ln)
        if len(parts) < 5:
            raise ValueError(f"{path}: bad entry line {ln!r}")
        mat, blk, i, j = (int(x) for x in parts[:4])
        v = float(parts[4])
        F[blk - 1][mat, i - 1, j - 1] = v
        F[blk - 1][mat, j - 1, i - 1] = v
    meta_file = _meta_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    free = meta.get("free")
    free_idx = free["block"] - 1 if free else None
    labels = meta.get("labels") or []
    blocks: list[SdpBlock] = []
    for k, s in enumerate(sizes):
        if k == free_idx:
            continue
        if s < 0:
            # plain diagonal block: one 1x1 PSD block per diagonal entry
            for d in range(-s):
                blocks.append(SdpBlock(1, F[k][1:, d, d][:, None, None], C=-F[k][0, d, d], label=f"b{k + 1}d{d + 1}"))
            continue
        label = labels[len(blocks)] if len(blocks) < len(labels) else f"b{k + 1}"
        blocks.append(SdpBlock(s, F[k][1:], C=-F[k][0], label=label))
    if free:
        nf = -sizes[free_idx] // 2
        diag = np.diagonal(F[free_idx], axis1=1, axis2=2)
        B = diag[1:, :nf]
        c_free = -diag[0, :nf]
        return SdpProblem(blocks, b, B=B, c_free=c_free, free_names=list(free["names"]), meta=meta.get("extra") or {})
    return SdpProblem(blocks, b, meta=meta.get("extra") or {})
