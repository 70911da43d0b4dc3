"""The five figure kinds.

Rendering is deterministic: fixed figure geometry and dpi, colors indexed by
branch/level number, nothing time- or environment-dependent drawn, and the
PNG Software tag stripped so a rerun reproduces the output byte for byte.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .io import PlotDataError, load_fit_json, load_table  # noqa: E402

_SOUND_SPEED = math.sqrt(5.0 / 3.0)
_DPI = 110

_RC = {
    "figure.dpi": _DPI,
    "savefig.dpi": _DPI,
    "font.size": 9.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8.0,
}


def _color(i: int):
    return plt.get_cmap("tab10")(int(i) % 10)


def _render_profile(cols, fit, fig):
    ax = fig.subplots()
    ax.plot(cols["r"], cols["lambda1"], color=_color(0), label="lambda1 (radial)")
    ax.plot(cols["r"], cols["lambda2"], color=_color(1), label="lambda2 (transverse)")
    ax.set_xlabel("r")
    ax.set_ylabel("eigenvalue")
    ax.set_title("diffusion tensor eigenvalue profiles")
    ax.legend()


def _render_spectrum(cols, fit, fig):
    ax = fig.subplots()
    sc = ax.scatter(
        cols["re"], cols["im"], c=cols["kappa"], s=6.0, cmap="viridis", linewidths=0
    )
    fig.colorbar(sc, ax=ax, label="kappa")
    tau = fit.get("tau_hat")
    if tau is not None:
        ax.axvline(-float(tau), color="crimson", ls="--", lw=1.0, label="-tau")
        # the conjugated tail produces eigenvalues thousands deep; clip the
        # window so the gap region around the -tau line stays readable
        ax.set_xlim(-10.0 * float(tau), 0.5 * float(tau))
        ax.legend(loc="upper left")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title("mode spectrum")


def _render_branches(cols, fit, fig):
    ax_im, ax_re = fig.subplots(2, 1, sharex=True)
    js = sorted(set(int(j) for j in cols["j"]))
    kap_max = float(np.max(cols["kappa"]))
    for j in js:
        sel = cols["j"].astype(int) == j
        kap = cols["kappa"][sel]
        order = np.argsort(kap)
        ax_im.plot(kap[order], cols["im_sigma"][sel][order], color=_color(j),
                   label=f"branch {j}")
        ax_re.plot(kap[order], cols["re_sigma"][sel][order], color=_color(j))
    guide_k = np.linspace(0.0, kap_max, 128)
    for sign in (+1.0, -1.0):
        ax_im.plot(guide_k, sign * _SOUND_SPEED * guide_k, color="k", ls="--",
                   lw=0.8, label="acoustic slope" if sign > 0 else None)
    a2 = fit.get("a2")
    if a2 is not None:
        for j, coeff in zip(js, a2):
            ax_re.plot(guide_k, -float(coeff) * guide_k**2, color=_color(j),
                       ls=":", lw=0.9)
    ax_im.set_ylabel("Im sigma")
    ax_re.set_ylabel("Re sigma")
    ax_re.set_xlabel("kappa")
    ax_im.set_title("fluid dispersion branches")
    ax_im.legend(loc="upper left", ncols=2)


def _render_chain(cols, fit, fig):
    ax = fig.subplots()
    js = sorted(set(int(j) for j in cols["j"]))
    for j in js:
        sel = cols["j"].astype(int) == j
        t = cols["t"][sel]
        norm = cols["norm"][sel]
        pos = norm > 0.0
        if not np.any(pos):
            continue
        label = f"j={j}"
        if "fitted_order" in cols and "fitted_rate" in cols:
            p = float(cols["fitted_order"][sel][0])
            r = float(cols["fitted_rate"][sel][0])
            label += f"  (p {p:+.2f}, r {r:.2f})"
        ax.semilogy(t[pos], norm[pos], color=_color(j + 1), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("level norm")
    ax.set_title("expansion chain level envelopes")
    ax.legend()


def _render_regimes(cols, fit, fig):
    regimes = sorted(set(cols["regime"]))
    axes = fig.subplots(1, len(regimes), sharex=True)
    if len(regimes) == 1:
        axes = [axes]
    for ax, tag in zip(axes, regimes):
        sel = cols["regime"] == tag
        t = cols["t"][sel]
        order = np.argsort(t)
        t = t[order]
        val = cols["value"][sel][order]
        ref = cols["reference"][sel][order]
        pos = val > 0.0
        if np.any(pos):
            ax.semilogy(t[pos], val[pos], color=_color(0), label="measured")
            # algebraic guide anchored at the curve peak
            c0 = float(val[pos].max())
            ax.semilogy(t, c0 * (1.0 + t) ** -1.5, color="k", ls=":", lw=0.9,
                        label="(1+t)^-3/2")
        rpos = ref > 0.0
        if np.any(rpos):
            ax.semilogy(t[rpos], ref[rpos], color="gray", ls="--", lw=1.0,
                        label="reference")
        ax.set_title(f"regime {tag}")
        ax.set_xlabel("t")
        ax.legend()
    axes[0].set_ylabel("norm")


_FIGURES = {
    "profile": (_render_profile, ("r", "lambda1", "lambda2"), (5.2, 3.6)),
    "spectrum": (_render_spectrum, ("kappa", "re", "im"), (5.6, 4.0)),
    "branches": (
        _render_branches,
        ("kappa", "j", "re_sigma", "im_sigma", "overlap"),
        (5.6, 5.4),
    ),
    "chain": (_render_chain, ("t", "j", "norm"), (5.6, 4.0)),
    "regimes": (_render_regimes, ("regime", "t", "value", "reference"), (8.4, 3.2)),
}

FIGURE_KINDS = tuple(sorted(_FIGURES))


def render(kind: str, table_path, out_path, fit_path=None) -> None:
    """Render one figure kind from its artifact table.

    All input validation happens before the output path is touched, so a bad
    table never leaves a file behind.
    """
    if kind not in _FIGURES:
        raise PlotDataError(
            f"unknown figure kind {kind!r}; expected one of {', '.join(FIGURE_KINDS)}"
        )
    draw, required, size = _FIGURES[kind]
    cols = load_table(table_path, required=required)
    fit = load_fit_json(fit_path)
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=size)
        try:
            draw(cols, fit, fig)
            fig.tight_layout()
            fig.savefig(out_path, metadata={"Software": None})
        finally:
            plt.close(fig)
