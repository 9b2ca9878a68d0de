"""Cross-check every corpus verdict against bounded model enumeration."""

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from slentail import VALID, check_entailment, parse_system
from slentail.oracle import COUNTERMODEL, OracleConfig, bounded_entailment


@dataclass
class CheckConfig:
    corpus: Path = Path(__file__).resolve().parent.parent / "corpus"
    depth: int = 4
    cells: int = 8


def main(cfg: CheckConfig):
    oracle = OracleConfig(depth=cfg.depth, cells=cfg.cells)
    conflicts, total = 0, 0.0
    for path in sorted(cfg.corpus.glob("row*.sid")):
        system = parse_system(path.read_text())
        verdict = check_entailment(system).answer
        t = time.perf_counter()
        res = bounded_entailment(system, config=oracle)
        total += time.perf_counter() - t
        clash = verdict == VALID and res.kind == COUNTERMODEL
        conflicts += clash
        print(f"{path.stem:24} {verdict:8} {res}{'  CONFLICT' if clash else ''}")
    print(f"\n{conflicts} conflict(s); oracle time {total:.2f}s")
    return conflicts


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=CheckConfig.depth)
    ap.add_argument("--cells", type=int, default=CheckConfig.cells)
    a = ap.parse_args()
    raise SystemExit(1 if main(CheckConfig(depth=a.depth, cells=a.cells)) else 0)
