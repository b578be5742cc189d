"""Command-line front end binding the pipeline into reproducible runs.

Every command reads one `key = value` config file (plus optional inline
overrides), writes its outputs under the configured directory with fixed
formatting, and reports through exit codes: 0 success, 2 invalid config or
input file, 3 quadrature budget exhausted (partial outputs removed), 4
requested frequency off the lattice band, 5 empty recovery aperture, 6
support experiment failed (report still written).  Outputs are byte-stable
across reruns and worker counts; LIGHTRAY_THREADS caps workers (0 = auto).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import ALLOWED_KEYS, RunConfig, load_config
from .errors import (
    ApertureTooSmall,
    BadMagic,
    ConfigError,
    GridFormatError,
    OutOfBand,
    QuadratureBudgetExceeded,
    TruncatedPayload,
)
from .gridio import fmt, grid_bytes, sinogram_csv, sinogram_grid_bytes
from .inversion import invert_sinogram
from .raytransform import make_sinogram
from .scenarios import report_csv, report_text, support_experiment
from .spectral import FORWARD_CONVENTION, slice_gap_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUADRATURE = 3
EXIT_BAND = 4
EXIT_APERTURE = 5
EXIT_EXPERIMENT = 6


def resolve_workers() -> int:
    raw = os.environ.get("LIGHTRAY_THREADS", "1")
    try:
        w = int(raw)
    except ValueError:
        raise ConfigError("LIGHTRAY_THREADS must be an integer") from None
    if w < 0:
        raise ConfigError("LIGHTRAY_THREADS must be >= 0")
    return w if w > 0 else (os.cpu_count() or 1)


class _Writer:
    """Collects written paths so a failing run can remove partial outputs."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.written: list[Path] = []

    def ready(self):
        self.outdir.mkdir(parents=True, exist_ok=True)

    def write_bytes(self, name: str, data: bytes) -> Path:
        self.ready()
        path = self.outdir / name
        path.write_bytes(data)
        self.written.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def cleanup(self):
        for path in self.written:
            path.unlink(missing_ok=True)


def _inversion_axes(acq):
    """Time axis of the inversion lattice copies spatial axis 0."""
    t_origin = np.concatenate([[acq.x_origin[0]], acq.x_origin])
    t_spacing = np.concatenate([[acq.x_spacing[0]], acq.x_spacing])
    t_counts = (acq.x_counts[0],) + acq.x_counts
    return t_origin, t_spacing, t_counts


def cmd_forward(cfg: RunConfig, out: _Writer) -> int:
    f, _ = cfg.build_field()
    acq = cfg.build_acquisition()
    q = cfg.build_quadrature()
    sino = make_sinogram(f, acq, q, workers=resolve_workers())
    out.write_text("sinogram.csv", sinogram_csv(sino))
    out.write_bytes("sinogram.lrgf", sinogram_grid_bytes(sino))
    print(f"forward: {acq.x_points().shape[0] * acq.n_dirs} rays")
    print(f"forward: max quadrature error {fmt(sino.max_error)}")
    print(f"forward: wrote {out.outdir / 'sinogram.csv'} and sinogram.lrgf")
    return EXIT_OK


def _slice_csv(rep) -> str:
    n = rep.n
    header = (
        [f"theta{ax + 1}" for ax in range(n)]
        + [f"xi{ax + 1}" for ax in range(n)]
        + ["lhs_re", "lhs_im", "rhs_re", "rhs_im", "rel_gap"]
    )
    lines = [",".join(header)]
    for r in range(rep.gaps.shape[0]):
        cells = (
            [fmt(v) for v in rep.thetas[r]]
            + [fmt(v) for v in rep.xis[r]]
            + [
                fmt(rep.lhs[r].real),
                fmt(rep.lhs[r].imag),
                fmt(rep.rhs[r].real),
                fmt(rep.rhs[r].imag),
                fmt(rep.gaps[r]),
            ]
        )
        lines.append(",".join(cells))
    lines.append(f"# max_gap = {fmt(rep.max_gap)}")
    return "\n".join(lines) + "\n"


def cmd_slice_check(cfg: RunConfig, out: _Writer, refine: bool) -> int:
    f, analytic = cfg.build_field()
    if not analytic:
        raise ConfigError("slice-check needs an analytic field (field.name/potential)")
    counts = cfg.get_int("slice.counts", 64 if cfg.n == 2 else 32)
    workers = resolve_workers()
    rep = slice_gap_report(
        f,
        counts,
        n_dirs=cfg.get_int("slice.n_dirs", 10),
        bins_per_dir=cfg.get_int("slice.bins_per_dir", 20),
        seed=cfg.seed,
        workers=workers,
    )
    out.write_text("slice_report.csv", _slice_csv(rep))
    print(f"slice-check: {rep.gaps.shape[0]} samples at {counts} per axis")
    print(f"slice-check: max relative gap {fmt(rep.max_gap)}")
    if refine or cfg.get_bool("slice.refine", False):
        fine = slice_gap_report(
            f,
            2 * counts,
            seed=cfg.seed,
            workers=workers,
            pairs=(rep.thetas, rep.xis),
            extent_factor=8.0,
        )
        out.write_text("slice_report_refined.csv", _slice_csv(fine))
        print(f"slice-check: refined max relative gap {fmt(fine.max_gap)}")
    return EXIT_OK


def _truth_spectra(f, res):
    """True curl (n = 2) or d-form (n = 3) spectrum at recovered bins."""
    bins = np.argwhere(res.dform.recovered)
    freqs = res.dform.freqs
    zeta = np.stack(
        [freqs[ax][bins[:, ax]] for ax in range(len(freqs))], axis=-1
    )
    comp_hat = [c.hat_points(zeta) for c in f.components]
    true_pairs = []
    for i, j in res.dform.pairs:
        true_pairs.append(1j * (zeta[:, j] * comp_hat[i] - zeta[:, i] * comp_hat[j]))
    true_pairs = np.stack(true_pairs)
    if res.curl_hat is not None:
        truth = np.stack([-true_pairs[2], true_pairs[1], -true_pairs[0]])
        rec = res.curl_hat[(slice(None),) + tuple(bins.T)]
    else:
        truth = true_pairs
        rec = res.dform.coeffs[(slice(None),) + tuple(bins.T)]
    return rec, truth


def _error_csv(f, res) -> str:
    rec, truth = _truth_spectra(f, res)
    lines = ["component,rel_l2,max_abs_recovered"]

    def rel(a, b):
        den = float(np.sum(np.abs(b) ** 2))
        num = float(np.sum(np.abs(a - b) ** 2))
        if den == 0.0:
            return 0.0 if num == 0.0 else float("inf")
        return float(np.sqrt(num / den))

    for p, label in enumerate(res.spatial_labels):
        lines.append(
            f"{label},{fmt(rel(rec[p], truth[p]))},{fmt(np.abs(rec[p]).max() if rec[p].size else 0.0)}"
        )
    lines.append(
        f"all,{fmt(rel(rec, truth))},{fmt(np.abs(rec).max() if rec.size else 0.0)}"
    )
    return "\n".join(lines) + "\n"


def cmd_reconstruct(cfg: RunConfig, out: _Writer) -> int:
    f, analytic = cfg.build_field()
    acq = cfg.build_acquisition()
    q = cfg.build_quadrature()
    sino = make_sinogram(f, acq, q, workers=resolve_workers())
    t_origin, t_spacing, t_counts = _inversion_axes(acq)
    on_empty = cfg.get_str("spectral.on_empty", "report")
    res = invert_sinogram(
        sino,
        t_origin,
        t_spacing,
        t_counts,
        delta=cfg.delta,
        circle_count=cfg.circle_count,
        on_empty=on_empty,
    )
    pair_tag = "-".join(f"{i}{j}" for i, j in res.dform.pairs)
    out.write_bytes(
        "dform_spectrum.lrgf",
        grid_bytes(
            t_origin,
            t_spacing,
            res.dform.coeffs,
            f"{FORWARD_CONVENTION};dform;pairs={pair_tag}",
        ),
    )
    out.write_bytes(
        "spatial.lrgf",
        grid_bytes(
            t_origin,
            t_spacing,
            res.spatial.astype(complex),
            "spatial;" + ",".join(res.spatial_labels),
        ),
    )
    axes = len(t_counts)
    lines = [
        ",".join([f"i{ax}" for ax in range(axes)] + ["tau"]
                 + [f"xi{ax}" for ax in range(1, axes)] + ["reason"])
    ]
    for idx, tau, xi, reason in res.dform.unrecovered_rows():
        lines.append(
            ",".join(str(v) for v in idx)
            + f",{fmt(tau)},"
            + ",".join(fmt(v) for v in xi)
            + f",{reason}"
        )
    out.write_text("unrecovered.csv", "\n".join(lines) + "\n")
    print(f"reconstruct: recovered fraction {fmt(res.recovered_fraction)}")
    print(f"reconstruct: noise floor {fmt(res.noise_floor)}")
    print(f"reconstruct: imaginary leak {fmt(res.imag_leak)}")
    if res.recovered_fraction == 0.0:
        print("reconstruct: warning: no masked bin was recoverable; "
              "see unrecovered.csv")
    if analytic:
        out.write_text("error_vs_truth.csv", _error_csv(f, res))
        print("reconstruct: wrote error_vs_truth.csv")
    return EXIT_OK


def cmd_support_demo(cfg: RunConfig, out: _Writer) -> int:
    f, _ = cfg.build_field()
    acq = cfg.build_acquisition()
    q = cfg.build_quadrature()
    surface = cfg.build_surface()
    cylinder = cfg.build_cylinder()
    if surface is None and cylinder is None:
        raise ConfigError("support-demo needs surface.* or cylinder.* keys")
    rep = support_experiment(
        f,
        surface,
        acq,
        q,
        delta=cfg.delta,
        cylinder=cylinder,
        circle_count=cfg.circle_count,
        points_per_axis=cfg.get_int("support.points_per_axis", 16),
        workers=resolve_workers(),
    )
    out.write_text("support_report.csv", report_csv(rep))
    out.write_text("support_report.txt", report_text(rep))
    sys.stdout.write(report_text(rep))
    return EXIT_OK if rep.passed else EXIT_EXPERIMENT


FORMATS_TEXT = """\
lightray file formats

grid file (.lrgf)
  magic       5 bytes      "LRGF1"
  header      <III         dimension d, component count, tag length
  tag         ascii        convention tag (see below)
  counts      d * <u8      points per axis
  origin      d * <f8      first lattice coordinate per axis
  spacing     d * <f8      lattice step per axis
  payload     little-endian float64 (real, imaginary) pairs, component
              major, C order over axes; length = 2*8*components*prod(counts)
  tags: "fwd-i;absnorm;..." marks spectra under the convention
  hat f(zeta) = integral f(z) exp(-i z.zeta) dz with absolute normalization;
  "spatial;<labels>" marks real-space grids; "sinogram" marks transform
  values with axes = base-point lattice and components = directions.

sinogram CSV
  columns: x1..xn, theta1..thetan, re, im, quad_error
  rows: C order over the base-point lattice, direction fastest.
  All numbers carry 17 significant digits.

config files
  one "key = value" per line, '#' comments.  Keys:
""" + "\n".join(f"    {k}" for k in sorted(ALLOWED_KEYS)) + """

exit codes
  0 success, 2 invalid config or input file, 3 quadrature budget exhausted
  (partial outputs removed), 4 frequency off the lattice band, 5 empty
  recovery aperture, 6 support experiment failed (report still written).

environment
  LIGHTRAY_THREADS caps worker count; 0 means all cores.  Outputs are
  byte-identical across worker counts and reruns.
"""


def _parse_overrides(tokens) -> dict[str, str]:
    out: dict[str, str] = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"override {tok!r} is not key=value")
        key, value = tok.split("=", 1)
        key = key.strip()
        if key not in ALLOWED_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        out[key] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightray",
        description="light-ray transform pipeline: forward data, slice checks, "
        "spectrum recovery, support-theorem demos",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "forward": "integrate the field over the acquisition rays",
        "slice-check": "compare both sides of the slice identity",
        "reconstruct": "recover the curl/d-form spectrum from ray data",
        "support-demo": "run a masked-aperture support experiment",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("overrides", nargs="*", help="inline key=value overrides")
        if name == "slice-check":
            p.add_argument(
                "--refine",
                action="store_true",
                help="also run one refinement step at doubled resolution",
            )
    sub.add_parser("formats", help="print file format documentation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "formats":
        print(FORMATS_TEXT, end="")
        return EXIT_OK
    out = None
    try:
        cfg = load_config(args.config)
        cfg.overrides.update(_parse_overrides(args.overrides))
        out = _Writer(Path(cfg.output))
        if args.command == "forward":
            return cmd_forward(cfg, out)
        if args.command == "slice-check":
            return cmd_slice_check(cfg, out, args.refine)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, out)
        return cmd_support_demo(cfg, out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, BadMagic, TruncatedPayload, GridFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureBudgetExceeded as exc:
        if out is not None:
            out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except OutOfBand as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAND
    except ApertureTooSmall as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_APERTURE


if __name__ == "__main__":
    sys.exit(main())
