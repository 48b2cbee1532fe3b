import logging
import os

import numpy as np
from matplotlib.figure import Figure
from matplotlib.backends.backend_agg import FigureCanvasAgg

logger = logging.getLogger(__name__)


class Visualizer:
    """
    Renders convergence curves and estimator studies to SVG.
    """

    def __init__(self, output_dir="output"):
        self.output_dir = output_dir
        os.makedirs(self.output_dir, exist_ok=True)

    def save_convergence_plot(self, curves, filename, title="Convergence to Nash equilibrium", log_axes=True):
        """
        Mean squared error curves with their seed bands.

        Args:
            curves (list[dict]): Each with 'label', 'iter', 'mean', 'band_lo', 'band_hi'
                and optionally 'fit' (RateFit) to annotate the legend.
            filename (str): SVG file name inside output_dir.
            title (str): Axes title.
            log_axes (bool): log10 n vs log10 mean squared error; linear otherwise.

        Returns:
            str: Path of the written SVG.
        """
        path = os.path.join(self.output_dir, filename)

        # Object-oriented API with the Agg canvas: safe outside the main thread
        fig = Figure(figsize=(8, 6), constrained_layout=True)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)

        for curve in curves:
            label = curve["label"]
            fit = curve.get("fit")
            if fit is not None:
                label = f"{label} (slope {fit.slope:.2f})"
            iters = np.asarray(curve["iter"])
            line, = ax.plot(iters, curve["mean"], linewidth=1.5, label=label)
            ax.fill_between(iters, curve["band_lo"], curve["band_hi"], color=line.get_color(),
                            alpha=0.2, linewidth=0)

        if log_axes:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("iteration n", fontsize=10)
        ax.set_ylabel("mean ||x^n - x*||^2", fontsize=10)
        ax.set_title(title, fontsize=12)
        ax.grid(alpha=0.3, linestyle="--")
        if curves:
            ax.legend(loc="upper right", fontsize=9)

        fig.savefig(path, format="svg")
        logger.info(f"Plot saved to {path}")
        return path

    def save_bias_variance_plot(self, rows, filename, title="Estimator variance"):
        """Variance against h (one line per ell), log-log."""
        path = os.path.join(self.output_dir, filename)
        fig = Figure(figsize=(8, 6), constrained_layout=True)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)

        for ell in sorted({r["ell"] for r in rows}):
            sel = sorted((r for r in rows if r["ell"] == ell), key=lambda r: r["h"])
            ax.plot([r["h"] for r in sel], [r["variance"] for r in sel], marker="o", label=f"ell={ell}")

        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("h", fontsize=10)
        ax.set_ylabel("trace of covariance", fontsize=10)
        ax.set_title(title, fontsize=12)
        ax.grid(alpha=0.3, linestyle="--")
        ax.legend(loc="upper right", fontsize=9)

        fig.savefig(path, format="svg")
        logger.info(f"Plot saved to {path}")
        return path
