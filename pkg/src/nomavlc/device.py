"""LED nonlinearity and the closed-loop adaptive Chebyshev pre-distorter.

The LED follows the Rapp soft-saturation model applied independently to
the in-phase and quadrature rails (each rail is an intensity signal).
The pre-distorter is a Chebyshev expansion whose weights adapt by a
normalized stochastic-gradient rule with a positivity projection: an
update is accepted only if the expansion stays strictly positive on
both rails of every sample in the triggering batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


@dataclass
class LedModel:
    """Rapp transfer A(x) = x / (1 + (|x|/i_max)^(2p))^(1/(2p)).

    p controls knee severity (p = 0.5 is a severe knee), i_max is the
    saturation amplitude. Monotone and odd per rail; |A(x)| < i_max.
    """

    i_max: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if self.i_max <= 0 or self.p <= 0:
            raise ValueError(f"i_max and p must be positive, got {self.i_max}, {self.p}")


def _rapp_rail(x: np.ndarray, model: LedModel) -> np.ndarray:
    return x / (1.0 + (np.abs(x) / model.i_max) ** (2 * model.p)) ** (1.0 / (2 * model.p))


def led_apply(x, model: LedModel):
    """Apply the Rapp transfer componentwise; complex inputs are clipped per rail."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return _rapp_rail(x.real, model) + 1j * _rapp_rail(x.imag, model)
    return _rapp_rail(x.astype(float), model)


def chebyshev_basis(n: int, x: np.ndarray) -> np.ndarray:
    """Stack T_0(x) ... T_{n-1}(x) via the three-term recursion, shape (n, *x.shape)."""
    x = np.asarray(x, dtype=float)
    T = np.empty((n,) + x.shape)
    T[0] = 1.0
    if n > 1:
        T[1] = x
    for i in range(2, n):
        T[i] = 2.0 * x * T[i - 1] - T[i - 2]
    return T


def chebyshev_eval(coeffs: np.ndarray, x):
    """Evaluate sum_i r_i T_i(x) by the recursion; complex inputs go rail by rail."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x)
    if np.iscomplexobj(x):
        re = chebyshev_eval(coeffs, x.real)
        im = chebyshev_eval(coeffs, x.imag)
        return re + 1j * im
    T = chebyshev_basis(len(coeffs), x.astype(float))
    return np.tensordot(coeffs, T, axes=1)


@dataclass
class PredistorterState:
    """Chebyshev weights plus the adaptation constants.

    coeffs may be None before feasible initialization has run.
    probe_basis, when set, anchors the positivity projection to a fixed
    rail set in addition to each update's own batch (see cheb_nlms_step).
    """

    coeffs: np.ndarray | None
    eta: float
    beta: float = 1.0
    iteration: int = 0
    probe_basis: np.ndarray | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"step size eta must be positive, got {self.eta}")
        if self.coeffs is not None:
            self.coeffs = np.asarray(self.coeffs, dtype=float)
            if self.coeffs.size < 2:
                raise ValueError("need at least two Chebyshev terms")


@dataclass
class BussgangStats:
    """Linear-gain decomposition y = alpha x + delta with delta uncorrelated with x."""

    alpha: float
    sigma_delta2: float
    residual_corr: float


def _rails(x) -> np.ndarray:
    """Flatten a real or complex batch into its real rails."""
    x = np.atleast_1d(np.asarray(x))
    if np.iscomplexobj(x):
        return np.concatenate([x.real.ravel(), x.imag.ravel()])
    return x.astype(float).ravel()


def nlms_scalar_step(weight: float, x: float, lhat: float, eta: float, beta: float = 1.0) -> float:
    """Single-weight NLMS baseline: w' = w + (eta/|x|^2) e x, e = beta x - lhat.

    A zero-input sample is a no-op, not an error.
    """
    p = abs(x) ** 2
    if p == 0.0:
        return weight
    e = beta * x - lhat
    return weight + (eta / p) * e * x


def cheb_nlms_step(state: PredistorterState, x, lhat) -> PredistorterState:
    """One projected NLMS update over the rails of an input/feedback sample pair.

    Candidate: p_i = r_i + sum_rails (eta / sum_i T_i(rail)^2) e T_i(rail)
    with e = beta*rail(x) - rail(lhat). The candidate is kept only when
    sum_i p_i T_i(rail) > 0 on every rail of the batch (plus the state's
    probe anchor, when present); otherwise the weights are left untouched.

    The probe anchor keeps the expansion positive over the whole input
    range, not just the rails that happen to be in the triggering batch;
    without it, batches that miss the smallest inputs can drag the
    expansion negative there, after which every batch containing them is
    rejected forever (the projection deadlocks).
    """
    if state.coeffs is None:
        raise ValueError("pre-distorter has no coefficients; run feasible initialization first")
    xr, lr = _rails(x), _rails(lhat)
    if xr.shape != lr.shape:
        raise ValueError(f"input/feedback rails misaligned: {xr.shape} vs {lr.shape}")
    T = chebyshev_basis(state.coeffs.size, xr)  # (n_cheb, n_rails)
    e = state.beta * xr - lr
    denom = np.sum(T * T, axis=0)  # >= T_0^2 = 1, never zero
    cand = state.coeffs + state.eta * (T @ (e / denom))
    ok = np.all(cand @ T > 0.0)
    if ok and state.probe_basis is not None:
        ok = np.all(cand @ state.probe_basis > 0.0)
    if ok:
        return replace(state, coeffs=cand, iteration=state.iteration + 1)
    return replace(state, iteration=state.iteration + 1)


def feasible_init(
    n_cheb: int,
    probe,
    score: Callable[[np.ndarray], float] | None = None,
    rng: np.random.Generator | None = None,
    max_draws: int = 10_000,
) -> np.ndarray:
    """Random-search initializer for the pre-distorter weights.

    Draws start uniform on [0,1]^n and, when a score callable is given,
    anneal around the best feasible candidate so far (shrinking step,
    still pure random search). Feasibility means the expansion is
    strictly positive on both rails of the probe batch. Without a score
    the first feasible uniform draw wins. Raises if nothing feasible
    turns up within max_draws.
    """
    rng = rng if rng is not None else np.random.default_rng()
    pr = _rails(probe)
    T = chebyshev_basis(n_cheb, pr)
    best, best_score = None, np.inf
    rounds = 20 if score is not None else 1
    for draw in range(max_draws):
        rnd = draw * rounds // max(max_draws, 1)
        if rnd == 0 or best is None:
            r = rng.uniform(0.0, 1.0, n_cheb)
        else:
            r = best + rng.uniform(-1.0, 1.0, n_cheb) * (3.0 * 0.6**rnd)
        if not np.all(r @ T > 0.0):
            continue
        if score is None:
            return r
        s = score(r)
        if s < best_score:
            best, best_score = r, s
    if best is None:
        raise RuntimeError(f"no feasible pre-distorter initializer found in {max_draws} draws")
    return best


def train_predistorter(
    plant: Callable[[np.ndarray], np.ndarray],
    symbols: np.ndarray,
    state: PredistorterState,
    rng: np.random.Generator | None = None,
    window: int = 1000,
    probe_len: int = 256,
    n_cheb: int = 5,
) -> tuple[PredistorterState, np.ndarray]:
    """Run the projected Chebyshev-NLMS loop over a sample stream.

    plant maps one pre-distorted sample batch (the expansion output for
    one time step) to the aligned feedback batch, closing the loop through
    the device and channel. symbols has shape (n,) for scalar streams or
    (n, d) for vector streams; each step consumes one row and every rail
    contributes to the same update.

    Returns the final state and a smoothed squared-error trace with one
    entry per window of steps: each entry is the mean of (beta x - lhat)^2
    over the probe batch under the weights current at that window
    boundary, a low-variance estimate of the instantaneous E[e^2] (a
    running mean over the streaming samples would be dominated by which
    inputs happen to land in each window).
    """
    symbols = np.atleast_1d(np.asarray(symbols))
    n_steps = symbols.shape[0]
    probe = symbols[: min(probe_len, n_steps)]
    probe_rails = _rails(probe)
    probe_complex = np.iscomplexobj(probe)
    n_start = state.coeffs.size if state.coeffs is not None else n_cheb
    probe_T = chebyshev_basis(n_start, probe_rails)

    def probe_mse(r):
        pred_rails = r @ probe_T
        if probe_complex:
            half = pred_rails.size // 2
            pred = (pred_rails[:half] + 1j * pred_rails[half:]).reshape(probe.shape)
        else:
            pred = pred_rails.reshape(probe.shape)
        err = state.beta * probe_rails - _rails(plant(pred))
        return float(np.mean(err**2))

    if state.coeffs is None:
        coeffs = feasible_init(n_cheb, probe, score=probe_mse, rng=rng, max_draws=30_000)
        state = replace(state, coeffs=coeffs, probe_basis=probe_T)

    # Hot loop: same update as cheb_nlms_step, inlined on raw arrays so a
    # long run is not dominated by per-step state construction.
    # test_device pins loop-vs-step equivalence.
    coeffs = state.coeffs.copy()
    n_cheb_eff = coeffs.size
    probe_basis = state.probe_basis
    beta, eta = state.beta, state.eta
    is_complex = np.iscomplexobj(symbols)
    trace = []
    for k in range(n_steps):
        x = symbols[k]
        xr = np.concatenate([np.atleast_1d(x).real, np.atleast_1d(x).imag]) if is_complex else np.atleast_1d(x)
        T = chebyshev_basis(n_cheb_eff, xr)
        pred_rails = coeffs @ T
        if is_complex:
            half = pred_rails.size // 2
            pred = pred_rails[:half] + 1j * pred_rails[half:]
        else:
            pred = pred_rails
        lhat = plant(pred.reshape(np.shape(x)))
        e = beta * xr - _rails(lhat)
        cand = coeffs + eta * (T @ (e / np.sum(T * T, axis=0)))
        if np.all(cand @ T > 0.0) and (probe_basis is None or np.all(cand @ probe_basis > 0.0)):
            coeffs = cand
        if (k + 1) % window == 0:
            trace.append(probe_mse(coeffs))
    state = replace(state, coeffs=coeffs, iteration=state.iteration + n_steps)
    return state, np.asarray(trace)


def estimate_bussgang(x: np.ndarray, y: np.ndarray) -> BussgangStats:
    """Fit y = alpha x + delta over aligned streams.

    alpha = E[y conj(x)] / E[|x|^2] (real part; intensity rails carry real
    gain), sigma_delta2 is the variance of the residual rails, and
    residual_corr is the normalized second-moment cross-correlation
    |E[delta x]| / sqrt(E[delta^2] E[x^2]) over rails: the decomposition's
    "uncorrelated" is moment orthogonality, matching alpha's uncentered
    definition. It vanishes on the fitting set by construction and
    measures generalization on fresh samples.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"streams misaligned: {x.shape} vs {y.shape}")
    power = float(np.mean(np.abs(x) ** 2))
    if power == 0.0:
        raise ValueError("zero-power input stream")
    alpha = float(np.real(np.mean(y * np.conj(x))) / power)
    delta = y - alpha * x
    dr, xr = _rails(delta), _rails(x)
    sigma_delta2 = float(np.var(dr))
    denom = math.sqrt(float(np.mean(dr * dr)) * float(np.mean(xr * xr)))
    corr = 0.0 if denom == 0.0 else float(abs(np.mean(dr * xr)) / denom)
    return BussgangStats(alpha=alpha, sigma_delta2=sigma_delta2, residual_corr=corr)


def coeffs_csv(state: PredistorterState) -> str:
    """One weight per line with the adaptation constants in the header."""
    if state.coeffs is None:
        raise ValueError("no trained coefficients to serialize")
    lines = [f"# eta={state.eta:.10g} beta={state.beta:.10g} ncheb={state.coeffs.size}"]
    lines += [f"{w:.10g}" for w in state.coeffs]
    return "\n".join(lines) + "\n"
