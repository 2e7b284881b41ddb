#!/usr/bin/env python3
"""Writes the expected `uxmc memreport` output straight from the byte formulas.

Usage: gen_memreport_golden.py OUT_DIR
"""
import sys
from pathlib import Path

MIB = 1024 ** 2
GIB = 1024 ** 3


def head_bytes(rows, cols, fan_in):
    nnz = fan_in * cols if fan_in else rows * cols
    return {
        "DENSE": 4 * rows * cols,
        "COO64": (8 + 8 + 4) * nnz,
        "COO32": (4 + 4 + 4) * nnz,
        "CSC32": (4 + 4) * nnz + 4 * (cols + 1),
        "UNIFORM": (4 + 4) * nnz,
    }, nnz


def section(title, rows, cols, fan_in, dense_blocks):
    heads, nnz = head_bytes(rows, cols, fan_in)
    active = "UNIFORM" if fan_in else "DENSE"
    index = 4 * nnz if fan_in else 0
    total = heads[active] + dense_blocks
    lines = [(f"head.{k}", v) for k, v in heads.items()]
    lines += [("dense_blocks", dense_blocks), (f"total.{active}", total), ("adam_training", index + 4 * (total - index))]
    out = [f"# {title}"]
    for name, b in lines:
        out.append(f"{name:<20} {b:>16}  {b / MIB:>12.3f} MiB  {b / GIB:>9.3f} GiB")
    return "\n".join(out) + "\n\n"


REFERENCE = (section("reference: dense head, d=1024 L=2812281", 1024, 2812281, 0, 0)
             + section("reference: uniform head, d=1024 L=670091 s=32", 1024, 670091, 32, 0))


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    (out / "memreport.txt").write_text(REFERENCE)
    # d=64 features, m=256 intermediate (weights + bias), uniform head s=32 over L=1000.
    configured = section("configured: uniform head, d=256 L=1000 s=32", 256, 1000, 32, 4 * (64 * 256 + 256))
    (out / "memreport_configured.txt").write_text(configured + REFERENCE)


if __name__ == "__main__":
    main()
