"""Loading ``.sir`` corpora laid out as ``<root>/<benchmark>/lhs_<k>.sir``."""

from __future__ import annotations

import re
from pathlib import Path

from .ir import Block, IRError, parse_block

BUNDLED_CORPUS = Path(__file__).parent / "data" / "corpus"

_LHS_FILE = re.compile(r"lhs_(\d+)\.sir")


class CorpusError(ValueError):
    pass


def load_benchmark(path: str | Path) -> dict[str, Block]:
    """All ``lhs_<k>.sir`` files of one benchmark directory, ordered by ``k``.

    Ids are ``<benchmark>/lhs_<k>``.
    """
    path = Path(path)
    found = []
    for f in path.iterdir():
        m = _LHS_FILE.fullmatch(f.name)
        if m:
            found.append((int(m.group(1)), f))
    out = {}
    for k, f in sorted(found):
        try:
            out[f"{path.name}/lhs_{k}"] = parse_block(f.read_text(encoding="utf-8"))
        except IRError as e:
            raise CorpusError(f"{f}: {e}") from e
    return out


def load_corpus(root: str | Path | None = None,
                benchmarks: list[str] | None = None) -> dict[str, dict[str, Block]]:
    """Map benchmark name to its LHS blocks; empty benchmarks are left out.

    ``root=None`` loads the bundled corpus.
    """
    root = Path(BUNDLED_CORPUS if root is None else root)
    if not root.is_dir():
        raise CorpusError(f"{root}: not a corpus directory")
    names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if benchmarks is not None:
        missing = set(benchmarks) - set(names)
        if missing:
            raise CorpusError(f"{root}: no benchmark {sorted(missing)[0]!r}")
        names = [n for n in names if n in benchmarks]
    corpus = {}
    for name in names:
        lhs = load_benchmark(root / name)
        if lhs:
            corpus[name] = lhs
    if not corpus:
        raise CorpusError(f"{root}: no lhs_<k>.sir files found")
    return corpus


def flatten(corpus: dict[str, dict[str, Block]]) -> dict[str, Block]:
    """One id -> block map in benchmark order."""
    return {k: b for name in sorted(corpus) for k, b in corpus[name].items()}
