"""Static figures drawn from finished diagnostics (Agg backend, no display)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# PNG metadata carries no timestamp; drop the version string too so files
# depend only on the data.
_META = {"Software": None}


def flux_plot(path, fc):
    fig, ax = plt.subplots(figsize=(6, 4))
    N = np.asarray(fc.shells)
    for name, est in (("WA", fc.pi_wa), ("KE", fc.pi_ke), ("H", fc.pi_h)):
        mean = np.array([e.mean for e in est])
        err = np.array([e.stderr for e in est])
        ax.errorbar(N, mean, yerr=3 * err, marker="o", ms=3, capsize=2, label=f"Pi_{name} / sigma")
    ax.set_xscale("log", base=2)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("N")
    ax.set_ylabel("stationary flux")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def spectrum_plot(path, sp):
    fig, ax = plt.subplots(figsize=(6, 4))
    sel = (sp.k_shell > 0) & (sp.E_density > 0)
    ax.errorbar(sp.k_shell[sel], sp.E_density[sel], yerr=3 * sp.err[sel], fmt="o", ms=3,
                capsize=2, label="E(k)")
    if sp.E_linear_exact is not None:
        ex = sp.E_linear_exact
        s2 = sel & (ex > 0)
        ax.plot(sp.k_shell[s2], ex[s2], "x", label="linear closed form")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("|k|")
    ax.set_ylabel("shell spectrum")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
